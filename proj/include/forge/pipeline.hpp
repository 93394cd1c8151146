#pragma once

#include <openssl/evp.h>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "forge/association.hpp"
#include "forge/cleaning.hpp"
#include "forge/csv.hpp"
#include "forge/merge.hpp"
#include "forge/metrics.hpp"
#include "forge/missforest.hpp"
#include "forge/neural.hpp"
#include "forge/resample.hpp"
#include "forge/rl.hpp"
#include "forge/table.hpp"

namespace forge {

namespace fs = std::filesystem;

inline std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorKind::Io, "sha256 failed");
  }
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

inline std::string sha256_file(const fs::path& path) { return sha256_hex(read_file(path)); }

/// Canonical stage order.
inline const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names{"merge", "clean", "analyze", "impute", "smote",
                                              "train-ann", "train-logreg", "train-dqn", "evaluate"};
  return names;
}

/// Built-in configurations; a user config is layered on top.
inline std::string preset_text(const std::string& name) {
  if (name.empty() || name == "default") return "";
  const auto complete_cases_ann = [](const std::string& arch, const std::string& weights) {
    return "[impute]\nmethod = complete_cases\n[smote]\nenabled = false\n"
           "[train-ann]\nenabled = true\narch = " + arch + "\nweights = " + weights + "\n"
           "[train-logreg]\nenabled = false\n[train-dqn]\nenabled = false\n";
  };
  if (name == "experiment1") return complete_cases_ann("1200,1200,1200", "0.69,3.44,19.5");
  // the two experiment-1 variants tuned for fatal and serious accuracy
  if (name == "experiment1-fatal") return complete_cases_ann("1000,1000,1000", "0.69,2.44,17.5");
  if (name == "experiment1-serious") return complete_cases_ann("2000,500", "0.38,3.04,31.83");
  if (name == "experiment2") {
    return "[impute]\nmethod = complete_cases\n[smote]\nenabled = true\nk = 3\n"
           "[train-ann]\nenabled = true\narch = 1200,1200,1200\nweights = 0.89,1.07,1.23\n"
           "[train-logreg]\nenabled = false\n[train-dqn]\nenabled = false\n";
  }
  if (name == "experiment3") {
    return "[impute]\nmethod = missforest\n[smote]\nenabled = false\n"
           "[train-ann]\nenabled = true\narch = 1200,1200,1200\nweights = auto\n"
           "[train-logreg]\nenabled = true\nl2 = 0.0001\n[train-dqn]\nenabled = false\n";
  }
  if (name == "rl-baseline") {
    return "[impute]\nmethod = complete_cases\n[smote]\nenabled = false\n"
           "[train-ann]\nenabled = false\n[train-logreg]\nenabled = false\n"
           "[train-dqn]\nenabled = true\narch = 1200,1200,1200\nepisodes = 5800\ngamma = 0.1\n"
           "memory = 1000000\nepsilon_start = 1.0\nepsilon_end = 0.01\n";
  }
  throw Error(ErrorKind::Usage, "unknown preset '" + name + "'");
}

/// Key-value configuration with one section per stage. Relative paths are
/// resolved against the directory of the config file.
class PipelineConfig {
 public:
  PipelineConfig() = default;

  /// A non-empty `preset` replaces any run.preset in `text`.
  static PipelineConfig parse(std::string_view text, fs::path base_dir = fs::current_path(), const std::string& preset_override = "") {
    PipelineConfig cfg;
    cfg.base_ = std::move(base_dir);
    boost::property_tree::ptree user;
    try {
      std::istringstream in{std::string(text)};
      boost::property_tree::read_ini(in, user);
    } catch (const boost::property_tree::ini_parser_error& e) {
      throw Error(ErrorKind::Usage, std::string("config: ") + e.what());
    }
    if (!preset_override.empty()) user.put("run.preset", preset_override);
    std::string preset = user.get<std::string>("run.preset", "");
    if (!preset.empty()) {
      std::istringstream pin(preset_text(preset));
      boost::property_tree::read_ini(pin, cfg.tree_);
    }
    for (const auto& [section, keys] : user) {
      for (const auto& [key, value] : keys) cfg.tree_.put(boost::property_tree::ptree::path_type(section + "." + key, '.'), value.data());
    }
    return cfg;
  }

  static PipelineConfig load(const fs::path& path, const std::string& preset_override = "") {
    auto base = path.has_parent_path() ? fs::absolute(path).parent_path() : fs::current_path();
    return parse(read_file(path), base, preset_override);
  }

  void set(const std::string& key, const std::string& value) { tree_.put(key, value); }

  std::string str(const std::string& key, const std::string& fallback = "") const {
    return tree_.get<std::string>(key, fallback);
  }

  template <class T>
  T get(const std::string& key, T fallback) const {
    try {
      return tree_.get<T>(key, fallback);
    } catch (const boost::property_tree::ptree_error&) {
      throw Error(ErrorKind::Usage, "config key '" + key + "' has a malformed value");
    }
  }

  bool flag(const std::string& key, bool fallback) const {
    auto v = lower(str(key, fallback ? "true" : "false"));
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw Error(ErrorKind::Usage, "config key '" + key + "' must be true or false");
  }

  std::optional<fs::path> path(const std::string& key) const {
    auto v = str(key);
    if (v.empty()) return std::nullopt;
    fs::path p(v);
    return p.is_absolute() ? p : base_ / p;
  }

  std::vector<std::string> list(const std::string& key, const std::string& fallback = "") const {
    std::vector<std::string> out;
    std::string v = str(key, fallback);
    std::size_t start = 0;
    while (start <= v.size()) {
      auto comma = v.find(',', start);
      auto item = csv_detail::trim(v.substr(start, comma - start));
      if (!item.empty()) out.push_back(item);
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    return out;
  }

  std::vector<std::size_t> sizes(const std::string& key, const std::string& fallback) const {
    std::vector<std::size_t> out;
    for (const auto& s : list(key, fallback)) {
      try {
        out.push_back(static_cast<std::size_t>(std::stoull(s)));
      } catch (const std::logic_error&) {
        throw Error(ErrorKind::Usage, "config key '" + key + "' expects integers");
      }
    }
    return out;
  }

  const fs::path& base_dir() const { return base_; }

 private:
  static std::string lower(std::string s) { return csv_detail::lower(std::move(s)); }

  boost::property_tree::ptree tree_;
  fs::path base_ = fs::current_path();
};

/// One stage's failure: carries the stage name and the original error kind.
class StageError : public Error {
 public:
  StageError(std::string stage, const Error& cause)
      : Error(cause.kind(), "stage '" + stage + "' failed: " + cause.what()), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

/// 1 usage, 2 data, 3 any other stage failure.
inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Usage:
    case ErrorKind::PlanSyntax:
      return 1;
    case ErrorKind::Io:
    case ErrorKind::UnknownColumn:
    case ErrorKind::MissingColumn:
    case ErrorKind::DuplicateColumn:
    case ErrorKind::TypeParseError:
    case ErrorKind::SchemaMismatch:
    case ErrorKind::DuplicateKey:
    case ErrorKind::EmptyTable:
    case ErrorKind::MalformedTimestamp:
    case ErrorKind::MissingValuesPresent:
    case ErrorKind::RuleColumnMissing:
      return 2;
    default:
      return 3;
  }
}

struct ManifestEntry {
  std::string stage;
  std::string role;  // input | output
  std::string file;
  std::string sha256;
  std::uint64_t seed = 0;
};

namespace pipeline_detail {

inline std::vector<std::int32_t> read_predictions(const fs::path& path, std::vector<std::int32_t>* truth) {
  auto t = load_csv(path, {{"truth", FeatureKind::Nominal, ColumnRole::Feature},
                           {"prediction", FeatureKind::Nominal, ColumnRole::Feature}});
  auto p = t.column("prediction").codes();
  if (truth) {
    auto tr = t.column("truth").codes();
    truth->assign(tr.begin(), tr.end());
  }
  return {p.begin(), p.end()};
}

inline std::string format_predictions(std::span<const std::int32_t> truth, std::span<const std::int32_t> pred) {
  std::string out = "truth,prediction\n";
  for (std::size_t i = 0; i < pred.size(); ++i) out += std::to_string(truth[i]) + "," + std::to_string(pred[i]) + "\n";
  return out;
}

inline std::size_t stage_index(const std::string& name) {
  const auto& names = stage_names();
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw Error(ErrorKind::Usage, "unknown stage '" + name + "'");
  return static_cast<std::size_t>(it - names.begin());
}

}  // namespace pipeline_detail

/// Runs pipeline stages against an output directory. Every stage reads and
/// writes plain files there, so any stage can be re-run on its own.
class Pipeline {
 public:
  explicit Pipeline(PipelineConfig config, std::ostream* log = &std::cerr) : cfg_(std::move(config)), log_(log) {
    out_ = cfg_.path("run.out").value_or(fs::path("out"));
    seed_ = cfg_.get<std::uint64_t>("run.seed", 1);
  }

  const fs::path& out_dir() const { return out_; }
  std::uint64_t seed() const { return seed_; }

  bool enabled(const std::string& stage) const {
    const bool fallback = stage != "smote" && stage != "train-logreg" && stage != "train-dqn";
    return cfg_.flag(stage + ".enabled", fallback);
  }

  /// Runs every enabled stage in canonical order.
  void run() {
    for (const auto& s : stage_names()) {
      if (enabled(s)) run_stage(s);
    }
  }

  void run_stage(const std::string& stage) {
    pipeline_detail::stage_index(stage);
    fs::create_directories(out_);
    inputs_.clear();
    outputs_.clear();
    say(stage + ": start");
    const auto t0 = std::chrono::steady_clock::now();
    try {
      if (stage == "merge") merge();
      else if (stage == "clean") clean();
      else if (stage == "analyze") analyze();
      else if (stage == "impute") impute();
      else if (stage == "smote") smote_stage();
      else if (stage == "train-ann") train_ann();
      else if (stage == "train-logreg") train_logreg_stage();
      else if (stage == "train-dqn") train_dqn();
      else if (stage == "evaluate") evaluate_stage();
    } catch (const StageError&) {
      throw;
    } catch (const Error& e) {
      throw StageError(stage, e);
    } catch (const std::exception& e) {
      throw StageError(stage, Error(ErrorKind::StageFailure, e.what()));
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    record_manifest(stage, seconds);
    say(stage + ": done");
  }

 private:
  // ---- helpers ----

  void say(const std::string& msg) {
    if (log_) *log_ << "[forge] " << msg << "\n";
  }

  std::uint64_t stage_seed(const std::string& stage) const {
    return seed_ * 1000 + pipeline_detail::stage_index(stage);
  }

  fs::path artifact(const std::string& name) const { return out_ / name; }

  DataTable read_input(const fs::path& csv) {
    inputs_.push_back(csv);
    auto schema = fs::path(csv).replace_extension(".schema");
    if (fs::exists(schema)) inputs_.push_back(schema);
    return load_table(csv);
  }

  std::string read_text_input(const fs::path& p) {
    inputs_.push_back(p);
    return read_file(p);
  }

  void write_output(const std::string& name, std::string_view content) {
    write_file(artifact(name), content);
    outputs_.push_back(artifact(name));
  }

  void write_table(const std::string& name, const DataTable& t) {
    save_table(artifact(name), t);
    outputs_.push_back(artifact(name));
    outputs_.push_back(fs::path(artifact(name)).replace_extension(".schema"));
  }

  std::string relative(const fs::path& p) const {
    auto rel = fs::proximate(p, out_);
    auto s = rel.generic_string();
    return s.starts_with("..") ? fs::absolute(p).generic_string() : s;
  }

  void record_manifest(const std::string& stage, double seconds) {
    const auto order = [](const std::string& s) { return pipeline_detail::stage_index(s); };
    std::vector<ManifestEntry> rows;
    auto path = artifact("manifest.csv");
    if (fs::exists(path)) {
      std::istringstream in(read_file(path));
      std::string line;
      std::getline(in, line);
      while (std::getline(in, line)) {
        std::vector<std::string> f;
        std::size_t start = 0;
        while (true) {
          auto c = line.find(',', start);
          f.push_back(line.substr(start, c - start));
          if (c == std::string::npos) break;
          start = c + 1;
        }
        if (f.size() != 5 || f[0] == stage) continue;
        rows.push_back({f[0], f[1], f[2], f[3], std::stoull(f[4])});
      }
    }
    const auto seed = stage_seed(stage);
    for (const auto& p : inputs_) rows.push_back({stage, "input", relative(p), sha256_file(p), seed});
    for (const auto& p : outputs_) rows.push_back({stage, "output", relative(p), sha256_file(p), seed});
    std::stable_sort(rows.begin(), rows.end(), [&](const auto& a, const auto& b) { return order(a.stage) < order(b.stage); });
    std::string text = "stage,role,file,sha256,seed\n";
    for (const auto& r : rows) {
      text += r.stage + "," + r.role + "," + r.file + "," + r.sha256 + "," + std::to_string(r.seed) + "\n";
    }
    write_file(path, text);

    std::map<std::string, std::string> timings;
    auto tpath = artifact("timings.csv");
    if (fs::exists(tpath)) {
      std::istringstream in(read_file(tpath));
      std::string line;
      std::getline(in, line);
      while (std::getline(in, line)) {
        auto c = line.find(',');
        if (c != std::string::npos) timings[line.substr(0, c)] = line.substr(c + 1);
      }
    }
    timings[stage] = format_number(seconds);
    std::string ttext = "stage,seconds\n";
    for (const auto& s : stage_names()) {
      if (timings.count(s)) ttext += s + "," + timings[s] + "\n";
    }
    write_file(tpath, ttext);
  }

  ClassWeights weights_from(const std::string& key, const DataTable& train) const {
    auto spec = cfg_.str(key, "auto");
    if (spec == "auto") return class_weights(class_counts(train));
    if (spec == "uniform") return ClassWeights::uniform();
    auto parts = cfg_.list(key);
    if (parts.size() != kNumClasses) throw Error(ErrorKind::Usage, key + " needs auto, uniform or three weights");
    ClassWeights w;
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      w.weights[c] = std::stod(parts[c]);
      if (!(w.weights[c] > 0)) throw Error(ErrorKind::Usage, key + " weights must be positive");
    }
    return w;
  }

  NominalEncoding encoding(const std::string& section) const {
    auto v = cfg_.str(section + ".encoding", "integer");
    if (v == "integer") return NominalEncoding::Integer;
    if (v == "onehot") return NominalEncoding::OneHot;
    throw Error(ErrorKind::Usage, section + ".encoding must be integer or onehot");
  }

  TrainConfig train_config(const std::string& section, const DataTable& train) const {
    TrainConfig tc;
    tc.batch_size = cfg_.get<std::size_t>(section + ".batch_size", 512);
    tc.max_epochs = cfg_.get<std::size_t>(section + ".epochs", 100);
    tc.early_stopping_patience = cfg_.get<std::size_t>(section + ".patience", 5);
    tc.learning_rate = cfg_.get<double>(section + ".learning_rate", 1e-3);
    auto init = cfg_.str(section + ".init", "he");
    if (init == "he") tc.init = InitScheme::HeUniform;
    else if (init == "glorot") tc.init = InitScheme::GlorotUniform;
    else throw Error(ErrorKind::Usage, section + ".init must be he or glorot");
    tc.class_weights = weights_from(section + ".weights", train);
    tc.seed = stage_seed(section);
    tc.nominal_encoding = encoding(section);
    return tc;
  }

  /// Training table for the model stages: the oversampled one when SMOTE ran.
  DataTable training_table() {
    if (enabled("smote")) return read_input(artifact("train_smote.csv"));
    return read_input(artifact("train.csv"));
  }

  // ---- stages ----

  void merge() {
    auto data = cfg_.path("run.data").value_or(cfg_.base_dir() / "data");
    auto pick = [&](const std::string& key, const std::string& file) { return cfg_.path("merge." + key).value_or(data / file); };
    auto a = read_input(pick("accidents", "accidents.csv"));
    auto v = read_input(pick("vehicles", "vehicles.csv"));
    auto c = read_input(pick("casualties", "casualties.csv"));
    MergeKeys keys;
    keys.accident = cfg_.str("merge.accident_key", keys.accident);
    keys.vehicle = cfg_.str("merge.vehicle_key", keys.vehicle);
    auto result = merge_datasets(a, v, c, keys);
    write_table("merged.csv", result.table);
    write_output("merge_report.csv", format_merge_report(result.report));
    say("merge: " + std::to_string(result.table.n_rows()) + " rows x " + std::to_string(result.table.n_cols()) +
        " columns, " + std::to_string(result.report.orphans.size()) + " orphans");
  }

  void clean() {
    auto merged = read_input(artifact("merged.csv"));
    std::optional<fs::path> plan_path = cfg_.path("clean.plan");
#ifdef FORGE_DEFAULT_CONFIG_DIR
    if (!plan_path) plan_path = fs::path(FORGE_DEFAULT_CONFIG_DIR) / "cleaning.plan";
#endif
    if (!plan_path) throw Error(ErrorKind::Usage, "clean.plan is required");
    auto plan = parse_cleaning_plan(read_text_input(*plan_path));
    auto [table, report] = apply_cleaning(merged, plan);
    if (cfg_.flag("clean.expand_time", true) && table.has("Date") && table.has("Time")) table = expand_time(table);
    write_table("cleaned.csv", table);
    write_output("cleaning_report.csv", format_cleaning_report(report));
    char pct[32];
    std::snprintf(pct, sizeof pct, "%.2f%%",
                  report.rows_after ? 100.0 * static_cast<double>(report.incomplete_rows_after) / static_cast<double>(report.rows_after) : 0.0);
    say("clean: " + std::to_string(report.rows_after) + " rows, " + std::to_string(report.rows_dropped) + " dropped, " +
        pct + " incomplete");
  }

  void analyze() {
    auto table = read_input(artifact("cleaned.csv"));
    AssociationConfig ac;
    ac.high_correlation_threshold = cfg_.get<double>("analyze.threshold", 0.7);
    auto report = build_report(table, ac);
    write_output("association.csv", format_association_csv(report));
    write_output("association_summary.txt", format_association_summary(report));
    write_output("prune.csv", format_prune_list(report));
    say("analyze: " + std::to_string(report.candidates.size()) + " correlated pairs, " +
        std::to_string(report.pruned.size()) + " pruned");
  }

  void impute() {
    auto table = read_input(artifact("cleaned.csv"));
    std::vector<std::string> drop = cfg_.list("impute.drop");
    if (cfg_.flag("impute.apply_prune", true) && fs::exists(artifact("prune.csv"))) {
      for (auto& c : parse_prune_list(read_text_input(artifact("prune.csv")))) drop.push_back(std::move(c));
    }
    std::vector<std::string> present;
    for (const auto& d : drop) {
      if (table.has(d) && std::find(present.begin(), present.end(), d) == present.end()) present.push_back(d);
    }
    table = table.without(present);
    // Text columns and leftover keys carry no signal for the models.
    std::vector<std::string> inert;
    for (const auto& c : table.columns()) {
      if (c.role() != ColumnRole::Target && (c.kind() == FeatureKind::Text || c.role() != ColumnRole::Feature)) {
        inert.push_back(c.name());
      }
    }
    table = table.without(inert);

    const auto method = enabled("impute") ? cfg_.str("impute.method", "missforest") : std::string("none");
    std::string report_text = "item,count\nrows_in," + std::to_string(table.n_rows()) + "\n";
    if (method == "missforest") {
      std::optional<fs::path> plan_path = cfg_.path("impute.plan");
#ifdef FORGE_DEFAULT_CONFIG_DIR
      if (!plan_path) plan_path = fs::path(FORGE_DEFAULT_CONFIG_DIR) / "imputation.plan";
#endif
      if (!plan_path) throw Error(ErrorKind::Usage, "impute.plan is required for missforest");
      auto plan = parse_imputation_plan(read_text_input(*plan_path));
      if (cfg_.str("impute.trees") != "") plan.forest.n_trees = cfg_.get<std::size_t>("impute.trees", 100);
      plan.forest.seed = stage_seed("impute");
      plan.forest.threads = cfg_.get<std::size_t>("impute.threads", 0);
      auto [imputed, report] = missforest_impute(table, plan);
      write_output("imputation_report.csv", format_imputation_report(report));
      table = std::move(imputed);
      // Columns outside the plan may still be incomplete.
      const std::size_t before = table.n_rows();
      table = complete_rows(table);
      report_text += "rows_dropped_unplanned_missing," + std::to_string(before - table.n_rows()) + "\n";
    } else if (method == "complete_cases") {
      const std::size_t before = table.n_rows();
      table = complete_rows(table);
      report_text += "rows_dropped_incomplete," + std::to_string(before - table.n_rows()) + "\n";
    } else if (method != "none") {
      throw Error(ErrorKind::Usage, "impute.method must be missforest, complete_cases or none");
    }
    report_text += "rows_out," + std::to_string(table.n_rows()) + "\n";
    report_text += "dropped_columns," + std::to_string(present.size() + inert.size()) + "\n";

    const double test_fraction = cfg_.get<double>("impute.test_fraction", 0.25);
    const double val_fraction = cfg_.get<double>("impute.validation_fraction", 0.25);
    auto [train_all, test] = split(table, 1.0 - test_fraction, stage_seed("impute"));
    auto [train, val] = split(train_all, 1.0 - val_fraction, stage_seed("impute") + 1);
    write_table("train.csv", train);
    write_table("validation.csv", val);
    write_table("test.csv", test);
    write_output("impute_summary.csv", report_text);
    say("impute (" + method + "): train " + std::to_string(train.n_rows()) + ", validation " +
        std::to_string(val.n_rows()) + ", test " + std::to_string(test.n_rows()));
  }

  static DataTable complete_rows(const DataTable& t) {
    std::vector<std::size_t> keep;
    for (std::size_t r = 0; r < t.n_rows(); ++r) {
      bool ok = true;
      for (const auto& c : t.columns()) ok = ok && !c.is_missing_at(r);
      if (ok) keep.push_back(r);
    }
    return keep.size() == t.n_rows() ? t : t.take_rows(keep);
  }

  void smote_stage() {
    auto train = read_input(artifact("train.csv"));
    auto cfg = SmoteConfig::equalize(class_counts(train), cfg_.get<std::size_t>("smote.k", 3), stage_seed("smote"));
    auto out = smote(train, cfg);
    write_table("train_smote.csv", out);
    auto counts = class_counts(out);
    say("smote: " + std::to_string(counts[0]) + "/" + std::to_string(counts[1]) + "/" + std::to_string(counts[2]));
  }

  void train_ann() {
    auto train = training_table();
    auto val = read_input(artifact("validation.csv"));
    auto test = read_input(artifact("test.csv"));
    auto tc = train_config("train-ann", train);
    auto arch = cfg_.sizes("train-ann.arch", "1200,1200,1200");
    auto [clf, log] = train_supervised(train, val, arch, tc);
    save_model(artifact("ann.ckpt"), clf.model);
    outputs_.push_back(artifact("ann.ckpt"));
    write_output("ann_encoder.csv", clf.encoder.serialize());
    write_output("ann_training_log.csv", format_training_log(log));
    auto truth = target_labels(test);
    write_output("predictions_ann.csv", pipeline_detail::format_predictions(truth, clf.predict(test)));
    say("train-ann: best epoch " + std::to_string(log.best_epoch) + " of " + std::to_string(log.epochs.size()));
  }

  void train_logreg_stage() {
    auto train = training_table();
    auto val = read_input(artifact("validation.csv"));
    auto test = read_input(artifact("test.csv"));
    auto tc = train_config("train-logreg", train);
    auto [clf, log] = train_logreg(train, val, tc, cfg_.get<double>("train-logreg.l2", 1e-4));
    save_model(artifact("logreg.ckpt"), clf.model);
    outputs_.push_back(artifact("logreg.ckpt"));
    write_output("logreg_encoder.csv", clf.encoder.serialize());
    write_output("logreg_training_log.csv", format_training_log(log));
    auto truth = target_labels(test);
    write_output("predictions_logreg.csv", pipeline_detail::format_predictions(truth, clf.predict(test)));
    say("train-logreg: best epoch " + std::to_string(log.best_epoch));
  }

  void train_dqn() {
    auto train = training_table();
    auto test = read_input(artifact("test.csv"));
    AgentHyperparameters h;
    const std::string s = "train-dqn.";
    h.epsilon_start = cfg_.get<double>(s + "epsilon_start", 1.0);
    h.epsilon_end = cfg_.get<double>(s + "epsilon_end", 0.01);
    h.epsilon_decay_steps = cfg_.get<std::size_t>(s + "epsilon_decay_steps", 0);
    h.gamma = cfg_.get<double>(s + "gamma", 0.1);
    h.batch_size = cfg_.get<std::size_t>(s + "batch_size", 32);
    h.target_update_every = cfg_.get<std::size_t>(s + "target_update_every", 5);
    h.learning_rate = cfg_.get<double>(s + "learning_rate", 1e-3);
    h.memory_capacity = cfg_.get<std::size_t>(s + "memory", 1'000'000);
    h.fatal_reward = cfg_.get<double>(s + "fatal_reward", 1.0);
    auto opt = cfg_.str(s + "optimizer", "sgd");
    if (opt == "sgd") h.optimizer = OptimizerKind::Sgd;
    else if (opt == "adam") h.optimizer = OptimizerKind::Adam;
    else throw Error(ErrorKind::Usage, "train-dqn.optimizer must be sgd or adam");
    h.seed = stage_seed("train-dqn");
    auto arch = cfg_.sizes(s + "arch", "1200,1200,1200");
    auto result = train_rl(train, arch, h, cfg_.get<std::size_t>(s + "episodes", 100), encoding("train-dqn"));
    save_model(artifact("dqn_eval.ckpt"), result.agent.eval_network());
    save_model(artifact("dqn_target.ckpt"), result.agent.target_network());
    outputs_.push_back(artifact("dqn_eval.ckpt"));
    outputs_.push_back(artifact("dqn_target.ckpt"));
    write_output("dqn_encoder.csv", result.encoder.serialize());
    write_output("dqn_log.csv", format_rl_log(result.log));
    auto truth = target_labels(test);
    auto pred = rl_predict(result.agent.target_network(), result.encoder.encode(test));
    write_output("predictions_dqn.csv", pipeline_detail::format_predictions(truth, pred));
    say("train-dqn: " + std::to_string(result.log.episodes.size()) + " episodes, " +
        std::to_string(result.log.total_steps) + " steps");
  }

  void evaluate_stage() {
    std::string summary;
    std::string table = "model,metric,value\n";
    bool any = false;
    for (const std::string model : {"ann", "logreg", "dqn"}) {
      if (!enabled("train-" + model)) continue;
      auto path = artifact("predictions_" + model + ".csv");
      inputs_.push_back(path);
      std::vector<std::int32_t> truth;
      auto pred = pipeline_detail::read_predictions(path, &truth);
      auto report = evaluate(pred, truth);
      summary += "== " + model + "\n" + format_evaluation_summary(report) + "\n";
      std::istringstream rows(format_evaluation_csv(report));
      std::string line;
      std::getline(rows, line);
      while (std::getline(rows, line)) table += model + "," + line + "\n";
      any = true;
    }
    if (!any) throw Error(ErrorKind::Usage, "evaluate: no model stage is enabled");
    write_output("evaluation.csv", table);
    write_output("evaluation.txt", summary);
    say("evaluate: written evaluation.csv");
  }

  PipelineConfig cfg_;
  std::ostream* log_;
  fs::path out_;
  std::uint64_t seed_ = 1;
  std::vector<fs::path> inputs_;
  std::vector<fs::path> outputs_;
};

/// Runs all enabled stages; returns the process exit status.
inline int run_pipeline(const PipelineConfig& config, std::ostream& err = std::cerr) {
  try {
    Pipeline p(config, &err);
    p.run();
    return 0;
  } catch (const Error& e) {
    err << "forge: " << e.what() << "\n";
    return exit_code_for(e.kind());
  }
}

}  // namespace forge
