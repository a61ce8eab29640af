#include "ehi/corpus.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "ehi/error.hpp"
#include "ehi/png_io.hpp"

namespace ehi::corpus {

using nlohmann::json;

std::string_view to_string(Place p) noexcept {
  return p == Place::indoor ? "indoor" : "outdoor";
}

Place parse_place(std::string_view s) {
  if (s == "indoor") return Place::indoor;
  if (s == "outdoor") return Place::outdoor;
  throw Error(ErrorCode::parse, "unknown place '" + std::string(s) + "'");
}

fs::path Manifest::resolve(const ClipRecord& r) const {
  fs::path p(r.path);
  if (p.is_absolute() || root.empty()) return p;
  return root / p;
}

const ClipRecord* Manifest::find(std::string_view clip_id) const {
  auto it = std::find_if(records.begin(), records.end(),
                         [&](const ClipRecord& r) { return r.clip_id == clip_id; });
  return it == records.end() ? nullptr : &*it;
}

Manifest Manifest::with_records(std::vector<ClipRecord> recs) const {
  Manifest out;
  out.records = std::move(recs);
  out.provenance = provenance;
  out.root = root;
  return out;
}

fs::path rgb_frame_path(const fs::path& clip_dir, int t) {
  char name[32];
  std::snprintf(name, sizeof(name), "%06d.png", t);
  return clip_dir / "rgb" / name;
}

fs::path depth_frame_path(const fs::path& clip_dir, int t) {
  char name[32];
  std::snprintf(name, sizeof(name), "%06d.png", t);
  return clip_dir / "depth" / name;
}

namespace {

const std::set<std::string, std::less<>> kRecordKeys = {
    "clip_id", "subject_id", "gesture_id", "place", "num_frames", "path", "has_depth"};

ClipRecord record_from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("record is not a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!kRecordKeys.contains(key)) throw std::invalid_argument("unknown key '" + key + "'");
  }
  for (const auto& key : kRecordKeys) {
    if (!j.contains(key)) throw std::invalid_argument("missing key '" + key + "'");
  }
  ClipRecord r;
  r.clip_id = j.at("clip_id").get<std::string>();
  r.subject_id = j.at("subject_id").get<int>();
  r.gesture_id = j.at("gesture_id").get<int>();
  r.place = parse_place(j.at("place").get<std::string>());
  r.num_frames = j.at("num_frames").get<int>();
  r.path = j.at("path").get<std::string>();
  r.has_depth = j.at("has_depth").get<bool>();
  if (r.clip_id.empty()) throw std::invalid_argument("empty clip_id");
  if (r.subject_id < 1) throw std::invalid_argument("subject_id must be >= 1");
  if (r.gesture_id < 1) throw std::invalid_argument("gesture_id must be >= 1");
  if (r.num_frames < 1) throw std::invalid_argument("num_frames must be >= 1");
  return r;
}

std::size_t count_pngs(const fs::path& dir) {
  std::size_t n = 0;
  std::error_code ec;
  for (const auto& e : fs::directory_iterator(dir, ec)) {
    if (e.path().extension() == ".png") ++n;
  }
  return n;
}

void check_files(const Manifest& m) {
  std::vector<std::string> absent;
  std::vector<std::string> miscounted;
  for (const auto& r : m.records) {
    const fs::path dir = m.resolve(r);
    auto check_stream = [&](const char* sub, auto path_fn) {
      bool all_present = true;
      for (int t = 0; t < r.num_frames; ++t) {
        fs::path p = path_fn(dir, t);
        if (!fs::exists(p)) {
          absent.push_back(p.string());
          all_present = false;
        }
      }
      if (all_present && count_pngs(dir / sub) != static_cast<std::size_t>(r.num_frames)) {
        miscounted.push_back(r.clip_id + "/" + sub);
      }
    };
    check_stream("rgb", rgb_frame_path);
    if (r.has_depth) check_stream("depth", depth_frame_path);
  }
  if (!absent.empty()) {
    std::ostringstream msg;
    msg << absent.size() << " referenced frame file(s) missing:";
    const std::size_t shown = std::min<std::size_t>(absent.size(), 20);
    for (std::size_t i = 0; i < shown; ++i) msg << "\n  " << absent[i];
    if (absent.size() > shown) msg << "\n  ... and " << absent.size() - shown << " more";
    throw Error(ErrorCode::missing_files, msg.str());
  }
  if (!miscounted.empty()) {
    std::ostringstream msg;
    msg << "num_frames does not match stored frame count for:";
    for (const auto& s : miscounted) msg << ' ' << s;
    throw Error(ErrorCode::missing_files, msg.str());
  }
}

}  // namespace

void check_unique_ids(std::span<const ClipRecord> records) {
  std::unordered_set<std::string_view> seen;
  for (const auto& r : records) {
    if (!seen.insert(r.clip_id).second) {
      throw Error(ErrorCode::duplicate_id, "duplicate clip_id '" + r.clip_id + "'");
    }
  }
}

Manifest load_manifest(const fs::path& path, LoadOptions opts) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::missing_files, "manifest not found: " + path.string());
  Manifest m;
  m.root = path.parent_path();
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      m.records.push_back(record_from_json(json::parse(line)));
    } catch (const std::exception& e) {
      throw Error(ErrorCode::parse, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  check_unique_ids(m.records);

  fs::path prov = path;
  prov += ".provenance";
  if (std::ifstream pin(prov); pin) {
    std::ostringstream ss;
    ss << pin.rdbuf();
    m.provenance = ss.str();
  }
  if (opts.check_files) check_files(m);
  return m;
}

std::string to_json_line(const ClipRecord& r) {
  // Key order is fixed so manifests are byte-stable.
  json j = json::object();
  j["clip_id"] = r.clip_id;
  j["subject_id"] = r.subject_id;
  j["gesture_id"] = r.gesture_id;
  j["place"] = std::string(to_string(r.place));
  j["num_frames"] = r.num_frames;
  j["path"] = r.path;
  j["has_depth"] = r.has_depth;
  return j.dump();
}

void save_manifest(const Manifest& m, const fs::path& path) {
  check_unique_ids(m.records);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io, "cannot write manifest " + path.string());
  for (const auto& r : m.records) out << to_json_line(r) << '\n';
  if (!m.provenance.empty()) {
    fs::path prov = path;
    prov += ".provenance";
    std::ofstream pout(prov, std::ios::binary | std::ios::trunc);
    pout << m.provenance;
  }
}

PlaceSplit split_by_place(const Manifest& m) {
  std::vector<ClipRecord> indoor, outdoor;
  for (const auto& r : m.records) (r.place == Place::indoor ? indoor : outdoor).push_back(r);
  return {m.with_records(std::move(indoor)), m.with_records(std::move(outdoor))};
}

SubjectSplit split_subjects(const Manifest& m, const std::set<int>& train_ids,
                            const std::set<int>& val_ids, const std::set<int>& test_ids) {
  std::set<int> overlap;
  auto add_overlap = [&](const std::set<int>& a, const std::set<int>& b) {
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(),
                          std::inserter(overlap, overlap.end()));
  };
  add_overlap(train_ids, val_ids);
  add_overlap(train_ids, test_ids);
  add_overlap(val_ids, test_ids);
  auto join = [](const std::set<int>& ids) {
    std::string s;
    for (int id : ids) s += (s.empty() ? "" : ", ") + std::to_string(id);
    return s;
  };
  if (!overlap.empty()) {
    throw Error(ErrorCode::invalid_argument,
                "subject id sets overlap on subject(s) " + join(overlap));
  }
  std::set<int> uncovered;
  for (const auto& r : m.records) {
    if (!train_ids.contains(r.subject_id) && !val_ids.contains(r.subject_id) &&
        !test_ids.contains(r.subject_id)) {
      uncovered.insert(r.subject_id);
    }
  }
  if (!uncovered.empty()) {
    throw Error(ErrorCode::invalid_argument,
                "subject id sets do not cover subject(s) " + join(uncovered));
  }
  std::vector<ClipRecord> tr, va, te;
  for (const auto& r : m.records) {
    if (train_ids.contains(r.subject_id)) tr.push_back(r);
    else if (val_ids.contains(r.subject_id)) va.push_back(r);
    else te.push_back(r);
  }
  return {m.with_records(std::move(tr)), m.with_records(std::move(va)),
          m.with_records(std::move(te))};
}

GestureSplit split_gestures_even(const Manifest& m) {
  std::vector<ClipRecord> seen, unseen;
  for (const auto& r : m.records) (r.gesture_id % 2 == 0 ? seen : unseen).push_back(r);
  return {m.with_records(std::move(seen)), m.with_records(std::move(unseen))};
}

std::size_t PairSet::positives() const {
  return static_cast<std::size_t>(std::count_if(
      pairs.begin(), pairs.end(), [](const auto& p) { return p.label == PairLabel::same; }));
}

PairSet enumerate_verification_pairs(const Manifest& indoor, const Manifest& outdoor) {
  if (indoor.empty() || outdoor.empty()) {
    throw Error(ErrorCode::invalid_argument, "verification pairing needs nonempty indoor and outdoor manifests");
  }
  std::map<int, std::vector<const ClipRecord*>> outdoor_by_gesture;
  for (const auto& r : outdoor.records) outdoor_by_gesture[r.gesture_id].push_back(&r);

  PairSet out;
  for (const auto& a : indoor.records) {
    auto it = outdoor_by_gesture.find(a.gesture_id);
    if (it == outdoor_by_gesture.end()) continue;
    for (const ClipRecord* b : it->second) {
      out.pairs.push_back({a.clip_id, b->clip_id,
                           a.subject_id == b->subject_id ? PairLabel::same : PairLabel::different});
    }
  }
  std::sort(out.pairs.begin(), out.pairs.end(), [](const auto& x, const auto& y) {
    return std::tie(x.clip_a, x.clip_b) < std::tie(y.clip_a, y.clip_b);
  });
  return out;
}

std::span<const std::uint8_t> RawClip::rgb_frame(int t) const {
  const std::size_t n = pixels_per_frame() * 3;
  return {rgb.data() + static_cast<std::size_t>(t) * n, n};
}

std::span<const std::uint16_t> RawClip::depth_frame(int t) const {
  const std::size_t n = pixels_per_frame();
  return {depth.data() + static_cast<std::size_t>(t) * n, n};
}

RawClip read_clip_dir(const fs::path& dir, int num_frames, bool has_depth) {
  RawClip clip;
  clip.frames = num_frames;
  for (int t = 0; t < num_frames; ++t) {
    png::Image8 img;
    try {
      img = png::read8(rgb_frame_path(dir, t));
    } catch (const Error& e) {
      throw Error(ErrorCode::io, "rgb frame " + std::to_string(t) + " of " + dir.string() + ": " + e.what());
    }
    if (t == 0) {
      clip.width = img.width;
      clip.height = img.height;
      clip.rgb.reserve(clip.pixels_per_frame() * 3 * static_cast<std::size_t>(num_frames));
    } else if (img.width != clip.width || img.height != clip.height) {
      throw Error(ErrorCode::io, "rgb frame " + std::to_string(t) + " of " + dir.string() + " has mismatched size");
    }
    if (img.channels == 3) {
      clip.rgb.insert(clip.rgb.end(), img.data.begin(), img.data.end());
    } else {
      for (std::uint8_t v : img.data) clip.rgb.insert(clip.rgb.end(), {v, v, v});
    }
  }
  if (has_depth) {
    clip.depth.reserve(clip.pixels_per_frame() * static_cast<std::size_t>(num_frames));
    for (int t = 0; t < num_frames; ++t) {
      png::Image16 img;
      try {
        img = png::read_gray16(depth_frame_path(dir, t));
      } catch (const Error& e) {
        throw Error(ErrorCode::io, "depth frame " + std::to_string(t) + " of " + dir.string() + ": " + e.what());
      }
      if (img.width != clip.width || img.height != clip.height) {
        throw Error(ErrorCode::io, "depth frame " + std::to_string(t) + " of " + dir.string() + " has mismatched size");
      }
      clip.depth.insert(clip.depth.end(), img.data.begin(), img.data.end());
    }
  }
  return clip;
}

RawClip read_clip(const Manifest& m, const ClipRecord& r) {
  return read_clip_dir(m.resolve(r), r.num_frames, r.has_depth);
}

void write_clip(const RawClip& clip, const fs::path& dir) {
  if (!clip.has_rgb()) throw Error(ErrorCode::invalid_argument, "write_clip needs RGB frames");
  fs::create_directories(dir / "rgb");
  if (clip.has_depth()) fs::create_directories(dir / "depth");
  for (int t = 0; t < clip.frames; ++t) {
    png::write_rgb8(rgb_frame_path(dir, t), clip.width, clip.height, clip.rgb_frame(t));
    if (clip.has_depth()) {
      png::write_gray16(depth_frame_path(dir, t), clip.width, clip.height, clip.depth_frame(t));
    }
  }
}

}  // namespace ehi::corpus
