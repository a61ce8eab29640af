#include <fstream>
#include <iterator>
#include <set>

#include <ATen/CPUGeneratorImpl.h>

#include "ehi/error.hpp"
#include "ehi/net.hpp"

namespace ehi::net {

using torch::Tensor;

Tensor adapt_input_kernel(const Tensor& rgb_kernel, int in_channels) {
  if (rgb_kernel.size(1) != 3) throw Error(ErrorCode::invalid_argument, "adapt_input_kernel: source kernel is not RGB");
  switch (in_channels) {
    case 3: return rgb_kernel.clone();
    case 1: return rgb_kernel.mean(1, /*keepdim=*/true);
    case 4: return torch::cat({rgb_kernel, rgb_kernel.mean(1, true)}, 1);
  }
  throw Error(ErrorCode::invalid_argument, "adapt_input_kernel: unsupported channel count " + std::to_string(in_channels));
}

PretrainedReport load_pretrained(VideoResNetImpl& model, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::missing_prerequisite, "pretrained weights not found: " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  c10::IValue value;
  try {
    value = torch::pickle_load(bytes);
  } catch (const c10::Error& e) {
    throw Error(ErrorCode::io, "cannot read pretrained weights " + path.string() +
                                      " (legacy torch.save files must be re-saved in the zip format, see "
                                      "tools/resave_weights.py): " +
                                      e.what_without_backtrace());
  }
  if (!value.isGenericDict()) throw Error(ErrorCode::io, path.string() + " does not hold a state dict");
  // Training snapshots wrap the weights as {"state_dict": ..., "epoch": ..., ...}.
  {
    const auto outer = value.toGenericDict();
    const auto it = outer.find(c10::IValue(std::string("state_dict")));
    if (it != outer.end() && it->value().isGenericDict()) value = it->value();
  }

  auto params = model.named_parameters();
  auto buffers = model.named_buffers();
  std::set<std::string> provided;
  PretrainedReport report;
  torch::NoGradGuard guard;
  for (const auto& entry : value.toGenericDict()) {
    std::string key = entry.key().toStringRef();
    if (key.rfind("module.", 0) == 0) key = key.substr(7);
    if (key.rfind("fc.", 0) == 0 || !entry.value().isTensor()) {
      report.ignored.push_back(key);
      continue;
    }
    Tensor* dst = params.find(key);
    if (!dst) dst = buffers.find(key);
    if (!dst) {
      report.ignored.push_back(key);
      continue;
    }
    Tensor src = entry.value().toTensor().to(torch::kFloat32);
    if (dst->scalar_type() == torch::kLong) src = entry.value().toTensor().to(torch::kLong);
    if (key == "conv1.weight" && src.dim() > 1 && src.size(1) == 3 && dst->size(1) != 3) {
      src = adapt_input_kernel(src, static_cast<int>(dst->size(1)));
    }
    if (src.sizes() != dst->sizes()) {
      throw Error(ErrorCode::invalid_argument, "pretrained tensor '" + key + "' has shape " +
                                                   c10::str(src.sizes()) + ", model expects " +
                                                   c10::str(dst->sizes()));
    }
    dst->copy_(src);
    provided.insert(key);
    ++report.loaded;
  }
  for (const auto& p : params) {
    if (!provided.count(p.key())) report.missing.push_back(p.key());
  }
  return report;
}

namespace {

Tensor labels_tensor(const std::vector<int>& v) {
  Tensor t = torch::empty({static_cast<std::int64_t>(v.size())}, torch::kLong);
  for (std::size_t i = 0; i < v.size(); ++i) t[static_cast<std::int64_t>(i)] = v[i];
  return t;
}

std::vector<int> labels_vector(const Tensor& t) {
  std::vector<int> v(static_cast<std::size_t>(t.numel()));
  auto acc = t.accessor<std::int64_t, 1>();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<int>(acc[static_cast<std::int64_t>(i)]);
  return v;
}

std::string read_string(torch::serialize::InputArchive& ar, const std::string& key) {
  c10::IValue v;
  ar.read(key, v);
  return v.toStringRef();
}

ModelConfig stored_model_config(torch::serialize::InputArchive& ar) {
  kv::Document doc = kv::parse(read_string(ar, "model_config"), "checkpoint model_config");
  return model_config_from_kv(doc.first("model"));
}

CheckpointMeta restore(torch::serialize::InputArchive& ar, VideoResNetImpl& model,
                       torch::optim::Optimizer* optimizer, bool restore_rng) {
  CheckpointMeta meta;
  meta.config_text = read_string(ar, "config");
  c10::IValue epoch;
  ar.read("epoch", epoch);
  meta.epoch = static_cast<int>(epoch.toInt());
  Tensor labels;
  ar.read("subject_labels", labels);
  meta.subject_labels = labels_vector(labels);
  ar.read("gesture_labels", labels);
  meta.gesture_labels = labels_vector(labels);

  torch::serialize::InputArchive params;
  ar.read("params", params);
  model.load(params);
  if (optimizer) {
    torch::serialize::InputArchive opt;
    if (!ar.try_read("optimizer", opt)) {
      throw Error(ErrorCode::missing_prerequisite, "checkpoint has no optimizer state to resume from");
    }
    optimizer->load(opt);
  }
  if (restore_rng) {
    Tensor state;
    ar.read("rng_state", state);
    auto gen = at::detail::getDefaultCPUGenerator();
    std::lock_guard<std::mutex> lock(gen.mutex());
    gen.set_state(state);
  }
  return meta;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, VideoResNetImpl& model,
                     torch::optim::Optimizer* optimizer, const CheckpointMeta& meta) {
  kv::Document doc;
  model_config_to_kv(model.config(), doc.ensure("model"));
  torch::serialize::OutputArchive ar;
  ar.write("model_config", c10::IValue(kv::dump(doc)));
  ar.write("config", c10::IValue(meta.config_text));
  ar.write("epoch", c10::IValue(static_cast<std::int64_t>(meta.epoch)));
  ar.write("subject_labels", labels_tensor(meta.subject_labels), /*is_buffer=*/true);
  ar.write("gesture_labels", labels_tensor(meta.gesture_labels), true);
  {
    auto gen = at::detail::getDefaultCPUGenerator();
    std::lock_guard<std::mutex> lock(gen.mutex());
    ar.write("rng_state", gen.get_state(), true);
  }
  torch::serialize::OutputArchive params;
  model.save(params);
  ar.write("params", params);
  if (optimizer) {
    torch::serialize::OutputArchive opt;
    optimizer->save(opt);
    ar.write("optimizer", opt);
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  try {
    ar.save_to(path.string());
  } catch (const c10::Error& e) {
    throw Error(ErrorCode::io, "cannot write checkpoint " + path.string() + ": " + e.what_without_backtrace());
  }
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path, torch::optim::Optimizer* optimizer,
                                 bool restore_rng) {
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorCode::missing_prerequisite, "checkpoint not found: " + path.string() + " (run `ehi train` first)");
  }
  torch::serialize::InputArchive ar;
  try {
    ar.load_from(path.string());
    LoadedCheckpoint out;
    out.model = build_model(stored_model_config(ar));
    out.meta = restore(ar, *out.model, optimizer, restore_rng);
    return out;
  } catch (const c10::Error& e) {
    throw Error(ErrorCode::io, "cannot read checkpoint " + path.string() + ": " + e.what_without_backtrace());
  }
}

CheckpointMeta load_checkpoint_into(const std::filesystem::path& path, VideoResNetImpl& model,
                                    torch::optim::Optimizer* optimizer, bool restore_rng) {
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorCode::missing_prerequisite, "checkpoint not found: " + path.string());
  }
  torch::serialize::InputArchive ar;
  try {
    ar.load_from(path.string());
    return restore(ar, model, optimizer, restore_rng);
  } catch (const c10::Error& e) {
    throw Error(ErrorCode::io, "cannot read checkpoint " + path.string() + ": " + e.what_without_backtrace());
  }
}

}  // namespace ehi::net
