#include "ntssl/data_model.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>

#include "ntssl/error.hpp"

namespace ntssl {

using nlohmann::json;

TrackletDataset::TrackletDataset(std::vector<Tracklet> tracklets, std::size_t L, std::size_t d_in)
    : tracklets_(std::move(tracklets)), L_(L), d_in_(d_in) {
  if (!tracklets_.empty() && (L_ < 1 || d_in_ < 1)) throw UsageError("dataset: L and d_in must be >= 1");
  index_.reserve(tracklets_.size());
  for (std::size_t i = 0; i < tracklets_.size(); ++i) {
    const Tracklet& t = tracklets_[i];
    if (t.frames.rank() != 2 || t.frames.rows() != L_) {
      throw UsageError("dataset: inconsistent tracklet length for '" + t.tracklet_id + "' (expected L=" +
                       std::to_string(L_) + ")");
    }
    if (t.frames.cols() != d_in_) {
      throw UsageError("dataset: inconsistent feature dimension for '" + t.tracklet_id + "' (expected d_in=" +
                       std::to_string(d_in_) + ")");
    }
    if (t.position < 0) throw UsageError("dataset: negative position for '" + t.tracklet_id + "'");
    if (!index_.emplace(t.tracklet_id, i).second) {
      throw UsageError("dataset: duplicate tracklet_id '" + t.tracklet_id + "'");
    }
  }
}

std::optional<std::size_t> TrackletDataset::index_of(const std::string& tracklet_id) const {
  auto it = index_.find(tracklet_id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

namespace {

[[noreturn]] void fail_line(std::size_t line_no, const std::string& msg) {
  throw UsageError("dataset line " + std::to_string(line_no) + ": " + msg);
}

Tracklet parse_record(const json& j, std::size_t line_no, std::size_t L, std::size_t d_in) {
  if (!j.is_object()) fail_line(line_no, "record is not an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    if (k != "tracklet_id" && k != "video_id" && k != "position" && k != "frames" && k != "polyp_id" &&
        k != "attrs") {
      fail_line(line_no, "unknown key '" + k + "'");
    }
  }
  Tracklet t;
  try {
    t.tracklet_id = j.at("tracklet_id").get<std::string>();
    t.video_id = j.at("video_id").get<std::string>();
    t.position = j.at("position").get<std::int64_t>();
    const json& frames = j.at("frames");
    if (!frames.is_array()) fail_line(line_no, "frames is not an array");
    if (frames.size() != L) fail_line(line_no, "inconsistent tracklet length");
    std::vector<double> data;
    data.reserve(L * d_in);
    for (const json& row : frames) {
      if (!row.is_array()) fail_line(line_no, "frame row is not an array");
      if (row.size() != d_in) fail_line(line_no, "inconsistent feature dimension");
      for (const json& v : row) {
        if (!v.is_number()) fail_line(line_no, "non-numeric feature value");
        data.push_back(v.get<double>());
      }
    }
    t.frames = Tensor({L, d_in}, std::move(data));
    if (auto it = j.find("polyp_id"); it != j.end()) t.polyp_id = it->get<std::string>();
    if (auto it = j.find("attrs"); it != j.end()) {
      if (!it->is_object()) fail_line(line_no, "attrs is not an object");
      for (auto a = it->begin(); a != it->end(); ++a) {
        const int v = a.value().get<int>();
        if (v != 0 && v != 1) fail_line(line_no, "attribute '" + a.key() + "' must be 0 or 1");
        t.attrs[a.key()] = v;
      }
    }
  } catch (const json::exception& e) {
    fail_line(line_no, e.what());
  }
  return t;
}

json to_json(const Tracklet& t) {
  json j;
  j["tracklet_id"] = t.tracklet_id;
  j["video_id"] = t.video_id;
  j["position"] = t.position;
  json frames = json::array();
  for (std::size_t r = 0; r < t.frames.rows(); ++r) {
    auto row = t.frames.row(r);
    frames.push_back(json(std::vector<double>(row.begin(), row.end())));
  }
  j["frames"] = std::move(frames);
  if (t.polyp_id) j["polyp_id"] = *t.polyp_id;
  if (!t.attrs.empty()) j["attrs"] = t.attrs;
  return j;
}

}  // namespace

TrackletDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open dataset '" + path.string() + "'");
  std::string line;
  std::size_t line_no = 0;
  std::size_t L = 0, d_in = 0;
  bool have_header = false;
  std::vector<Tracklet> tracklets;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      fail_line(line_no, std::string("malformed JSON: ") + e.what());
    }
    if (!have_header) {
      try {
        if (j.at("schema").get<std::string>() != kDatasetSchema) fail_line(line_no, "unsupported schema");
        L = j.at("L").get<std::size_t>();
        d_in = j.at("d_in").get<std::size_t>();
      } catch (const json::exception& e) {
        fail_line(line_no, std::string("bad header: ") + e.what());
      }
      have_header = true;
      continue;
    }
    tracklets.push_back(parse_record(j, line_no, L, d_in));
  }
  if (!have_header) throw UsageError("dataset '" + path.string() + "' has no header line");
  return TrackletDataset(std::move(tracklets), L, d_in);
}

void save_dataset(const TrackletDataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw UsageError("cannot write dataset '" + path.string() + "'");
  json header = {{"schema", kDatasetSchema}, {"L", dataset.L()}, {"d_in", dataset.d_in()}};
  out << header.dump() << '\n';
  for (const Tracklet& t : dataset.records()) out << to_json(t).dump() << '\n';
  out.flush();
  if (!out) throw UsageError("I/O failure writing '" + path.string() + "'");
}

}  // namespace ntssl
