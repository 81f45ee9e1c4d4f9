#pragma once

// Model files: one JSON document with a version and an FNV-1a digest,
// written by temp file, fsync and rename.

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <span>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "fixscope/ast.hpp"
#include "fixscope/classify.hpp"
#include "fixscope/error.hpp"
#include "fixscope/model.hpp"
#include "fixscope/tree_io.hpp"

namespace fixscope {

inline constexpr int kModelFormatVersion = 1;

inline nlohmann::json to_json(const MatcherParams& m) {
  return {{"min_height", m.min_height},
          {"min_dice", m.min_dice},
          {"max_recovery_size", m.max_recovery_size},
          {"match_roots", m.match_roots}};
}

inline MatcherParams matcher_params_from_json(const nlohmann::json& j) {
  MatcherParams m;
  m.min_height = j.value("min_height", m.min_height);
  m.min_dice = j.value("min_dice", m.min_dice);
  m.max_recovery_size = j.value("max_recovery_size", m.max_recovery_size);
  m.match_roots = j.value("match_roots", m.match_roots);
  return m;
}

inline nlohmann::json to_json(const TrainConfig& c) {
  return {{"matcher", to_json(c.matcher)},
          {"distance", to_json(c.distance)},
          {"linkage", to_string(c.linkage)},
          {"cut", c.cut},
          {"min_size", c.min_size}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  if (j.contains("matcher")) c.matcher = matcher_params_from_json(j.at("matcher"));
  if (j.contains("distance")) c.distance = distance_config_from_json(j.at("distance"));
  if (j.contains("linkage")) c.linkage = parse_linkage(j.at("linkage").get<std::string>());
  c.cut = j.value("cut", c.cut);
  c.min_size = j.value("min_size", c.min_size);
  return c;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// FNV-1a over the compact dump of the document without its digest field.
inline std::string document_digest(nlohmann::json doc) {
  doc.erase("digest");
  return hex64(detail::fnv1a(detail::kFnvOffset, doc.dump()));
}

inline std::string corpus_digest(std::span<const SubmissionPair> pairs) {
  std::uint64_t h = detail::kFnvOffset;
  for (const auto& p : pairs) h = detail::fnv1a(h, corpus_line(p).dump() + "\n");
  return hex64(h);
}

inline nlohmann::json model_to_json(const ClusterModel& m) {
  using nlohmann::json;
  json items = json::array();
  for (const auto& it : m.items)
    items.push_back({{"script_id", it.script_id},
                     {"actions", to_json(it.script)},
                     {"src_ref", it.script.src_ref},
                     {"dst_ref", it.script.dst_ref},
                     {"incorrect_src", it.incorrect_src},
                     {"correct_src", it.correct_src},
                     {"ground_truth", it.ground_truth ? json(*it.ground_truth) : json(nullptr)}});
  json pool = json::array();
  for (const auto& t : m.pool) pool.push_back(write_tree(t));
  json clusters = json::array();
  for (const auto& c : m.clusters)
    clusters.push_back({{"cluster_id", c.cluster_id},
                        {"members", c.members},
                        {"medoid", c.medoid},
                        {"label", c.label ? json(*c.label) : json(nullptr)}});
  json doc = {{"format_version", kModelFormatVersion},
              {"train_config", to_json(m.config)},
              {"classifier", to_json(m.classifier)},
              {"vocabulary", m.metric.vocabulary() ? to_json(*m.metric.vocabulary()) : json(nullptr)},
              {"autoencoder", m.metric.autoencoder() ? to_json(*m.metric.autoencoder()) : json(nullptr)},
              {"items", std::move(items)},
              {"pool", std::move(pool)},
              {"clusters", std::move(clusters)},
              {"unclustered", m.unclustered},
              {"provenance", m.provenance}};
  doc["digest"] = document_digest(doc);
  return doc;
}

inline std::string model_digest(const ClusterModel& m) { return model_to_json(m).at("digest").get<std::string>(); }

inline ClusterModel model_from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("format_version") || !doc.at("format_version").is_number_integer())
    throw CorruptModel("model file has no format_version");
  const int version = doc.at("format_version").get<int>();
  if (version != kModelFormatVersion)
    throw VersionMismatch("model format_version " + std::to_string(version) + " is not supported (expected " +
                          std::to_string(kModelFormatVersion) + ")");
  if (!doc.contains("digest") || !doc.at("digest").is_string() ||
      doc.at("digest").get<std::string>() != document_digest(doc))
    throw CorruptModel("model digest does not match its contents");
  try {
    ClusterModel m;
    m.config = train_config_from_json(doc.at("train_config"));
    m.classifier = classifier_config_from_json(doc.at("classifier"));
    std::optional<Vocabulary> vocab;
    std::optional<Autoencoder> ae;
    if (!doc.at("vocabulary").is_null()) vocab = vocabulary_from_json(doc.at("vocabulary"));
    if (!doc.at("autoencoder").is_null()) ae = autoencoder_from_json(doc.at("autoencoder"));
    m.metric = ScriptMetric(m.config.distance, std::move(vocab), std::move(ae));
    for (const auto& j : doc.at("items")) {
      TrainingItem it;
      it.script_id = j.at("script_id").get<std::string>();
      it.script = script_from_json(j.at("actions"));
      it.script.src_ref = j.value("src_ref", "");
      it.script.dst_ref = j.value("dst_ref", "");
      it.incorrect_src = j.value("incorrect_src", "");
      it.correct_src = j.value("correct_src", "");
      if (j.contains("ground_truth") && !j.at("ground_truth").is_null())
        it.ground_truth = j.at("ground_truth").get<std::string>();
      m.items.push_back(std::move(it));
    }
    for (const auto& t : doc.at("pool")) m.pool.push_back(read_tree(t));
    const auto n = static_cast<int>(m.items.size());
    auto check = [n](int x) {
      if (x < 0 || x >= n) throw CorruptModel("member index " + std::to_string(x) + " out of range");
      return x;
    };
    for (const auto& j : doc.at("clusters")) {
      Cluster c;
      c.cluster_id = j.at("cluster_id").get<int>();
      if (c.cluster_id != static_cast<int>(m.clusters.size())) throw CorruptModel("cluster ids are not dense");
      for (int x : j.at("members").get<std::vector<int>>()) c.members.push_back(check(x));
      c.medoid = check(j.at("medoid").get<int>());
      if (!j.at("label").is_null()) c.label = j.at("label").get<std::string>();
      m.clusters.push_back(std::move(c));
    }
    for (int x : doc.at("unclustered").get<std::vector<int>>()) m.unclustered.push_back(check(x));
    m.provenance = doc.value("provenance", nlohmann::json::object());
    m.refresh();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw CorruptModel(std::string("malformed model: ") + e.what());
  } catch (const FormatError& e) {
    throw CorruptModel(std::string("malformed model: ") + e.what());
  }
}

enum class SaveStage { TempWritten, TempSynced, Renamed };

/// Test hook called at each save stage; may throw or terminate the process.
inline std::function<void(SaveStage)>& save_fault_hook() {
  static std::function<void(SaveStage)> hook;
  return hook;
}

/// Writes text to path so that readers see either the old or the new file.
inline void atomic_write(const std::filesystem::path& path, const std::string& text) {
  const std::filesystem::path tmp = path.string() + ".tmp." + std::to_string(::getpid());
  auto error = [&](const std::string& what) {
    return IoError(what + " " + tmp.string() + ": " + std::strerror(errno));
  };
  const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  if (fd < 0) throw error("cannot create");
  auto& hook = save_fault_hook();
  try {
    for (std::size_t off = 0; off < text.size();) {
      const ssize_t w = ::write(fd, text.data() + off, text.size() - off);
      if (w < 0 && errno != EINTR) throw error("cannot write");
      if (w > 0) off += static_cast<std::size_t>(w);
    }
    if (hook) hook(SaveStage::TempWritten);
    if (::fsync(fd) != 0) throw error("cannot sync");
    if (hook) hook(SaveStage::TempSynced);
    if (::rename(tmp.c_str(), path.c_str()) != 0) throw error("cannot rename");
  } catch (...) {
    ::close(fd);
    ::unlink(tmp.c_str());
    throw;
  }
  ::close(fd);
  std::filesystem::path dir = path.parent_path();
  if (dir.empty()) dir = ".";
  if (const int dfd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY); dfd >= 0) {
    ::fsync(dfd);
    ::close(dfd);
  }
  if (hook) hook(SaveStage::Renamed);
}

inline void save_model(const ClusterModel& m, const std::filesystem::path& path) {
  atomic_write(path, model_to_json(m).dump() + "\n");
}

inline ClusterModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("cannot read model " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(buf.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw CorruptModel("model " + path.string() + " is not valid JSON: " + e.what());
  }
  return model_from_json(doc);
}

}  // namespace fixscope
