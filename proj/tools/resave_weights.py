#!/usr/bin/env python3
"""Re-save a PyTorch checkpoint in the zip format `ehi --pretrained` reads.

Older Kinetics 3D ResNet releases were written with the legacy serializer.
Only the state dict is kept.
"""
import argparse

import torch


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("src")
    ap.add_argument("dst")
    args = ap.parse_args()
    obj = torch.load(args.src, map_location="cpu", weights_only=False)
    state = obj.get("state_dict", obj) if isinstance(obj, dict) else obj.state_dict()
    torch.save({k: v for k, v in state.items() if torch.is_tensor(v)}, args.dst)
    print(f"wrote {len(state)} tensors to {args.dst}")


if __name__ == "__main__":
    main()
