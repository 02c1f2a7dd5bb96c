#pragma once

// On-disk corpus layout:
//
//   <root>/manifest.csv
//   <root>/<session_id>/{left,right}.csv          recording
//   <root>/<session_id>/{left,right}.meta         key=value metadata
//   <root>/<session_id>/{left,right}.labels.csv   label track

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "arc/data_model.hpp"

namespace arc {

namespace fs = std::filesystem;

inline std::ifstream open_in(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) fail(Errc::io, "cannot open " + p.string());
  return in;
}

inline std::ofstream open_out(const fs::path& p) {
  std::error_code ec;
  if (p.has_parent_path()) fs::create_directories(p.parent_path(), ec);
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::io, "cannot write " + p.string());
  return out;
}

inline void close_checked(std::ofstream& out, const fs::path& p) {
  out.close();
  if (!out) fail(Errc::io, "write failed: " + p.string());
}

template <class Writer>
void write_file(const fs::path& p, Writer&& w) {
  auto out = open_out(p);
  w(out);
  close_checked(out, p);
}

inline std::string wrist_stem(Wrist w) { return w == Wrist::left ? "left" : "right"; }

// Returns the files written, relative to `root`.
inline std::vector<std::string> write_session(const fs::path& root, const Session& s) {
  std::vector<std::string> files;
  for (Wrist w : {Wrist::left, Wrist::right}) {
    const std::string stem = s.session_id + "/" + wrist_stem(w);
    RecordingMeta meta = s.recording(w).meta();
    meta.session_id = s.session_id;
    write_file(root / (stem + ".csv"), [&](std::ostream& o) { write_recording(o, s.recording(w)); });
    write_file(root / (stem + ".meta"), [&](std::ostream& o) { write_metadata(o, meta); });
    write_file(root / (stem + ".labels.csv"), [&](std::ostream& o) {
      write_labels(o, s.labels(w), s.recording(w).sample_rate());
    });
    for (const char* ext : {".csv", ".meta", ".labels.csv"}) files.push_back(stem + ext);
  }
  return files;
}

inline Recording read_recording(const fs::path& csv, const fs::path& meta_file) {
  auto mi = open_in(meta_file);
  const RecordingMeta meta = parse_metadata(mi);
  auto ri = open_in(csv);
  try {
    return parse_recording(ri, meta);
  } catch (const Error& e) {
    throw Error(e.code(), csv.string() + ": " + e.what(), e.line());
  }
}

inline LabelTrack read_labels(const fs::path& p, double sample_rate) {
  if (!fs::exists(p)) return LabelTrack{};
  auto in = open_in(p);
  try {
    return parse_labels(in, sample_rate);
  } catch (const Error& e) {
    throw Error(e.code(), p.string() + ": " + e.what(), e.line());
  }
}

// Reads and aligns one session directory.
inline Session read_session(const fs::path& dir) {
  const Recording left = read_recording(dir / "left.csv", dir / "left.meta");
  const Recording right = read_recording(dir / "right.csv", dir / "right.meta");
  const auto ll = read_labels(dir / "left.labels.csv", left.sample_rate());
  const auto rl = read_labels(dir / "right.labels.csv", right.sample_rate());
  std::string id = left.meta().session_id.empty() ? dir.filename().string() : left.meta().session_id;
  return align_session(left, right, ll, rl, std::move(id));
}

inline bool is_session_dir(const fs::path& p) {
  return fs::is_directory(p) && fs::exists(p / "left.csv") && fs::exists(p / "right.csv");
}

// Session directories under `root` in lexicographic order; `root` itself if
// it is a session directory.
inline std::vector<fs::path> list_sessions(const fs::path& root) {
  if (!fs::is_directory(root)) fail(Errc::io, "not a directory: " + root.string());
  if (is_session_dir(root)) return {root};
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(root))
    if (is_session_dir(e.path())) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  if (out.empty()) fail(Errc::empty_stream, "no sessions under " + root.string());
  return out;
}

using SessionVisitor = std::function<void(const Session&)>;
using SessionSource = std::function<void(const SessionVisitor&)>;

inline SessionSource directory_source(const fs::path& root) {
  auto dirs = list_sessions(root);
  return [dirs](const SessionVisitor& visit) {
    for (const auto& d : dirs) visit(read_session(d));
  };
}

inline std::vector<Session> collect(const SessionSource& source) {
  std::vector<Session> out;
  source([&](const Session& s) { out.push_back(s); });
  return out;
}

}  // namespace arc
