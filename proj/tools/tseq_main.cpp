// tseq: train and evaluate time-dependent event sequence predictors, and
// generate synthetic benchmark data with a known oracle.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tseq/tseq.hpp"

namespace fs = std::filesystem;
using Real = float;  // checkpoints hold float32; keeping the runtime in
                     // float32 makes save/load/forward bit-stable

namespace {

std::array<double, 3> parse_ratios(const std::string& s) {
  tseq::KvFile kv;
  kv.set("ratios", s);
  const auto list = kv.get_double_list("ratios");
  if (list.size() != 3) throw tseq::ConfigError("--ratios expects three comma-separated values");
  return {list[0], list[1], list[2]};
}

std::vector<int> parse_k_list(const std::string& s) {
  tseq::KvFile kv;
  kv.set("k", s);
  std::vector<int> out;
  for (double v : kv.get_double_list("k")) {
    const int k = static_cast<int>(v);
    if (k < 1 || static_cast<double>(k) != v) throw tseq::ConfigError("--k expects positive integers");
    out.push_back(k);
  }
  if (out.empty()) throw tseq::ConfigError("--k expects at least one value");
  return out;
}

// Raw file -> normalized, encoded token sequences (plus any target sets).
struct EncodedData {
  std::vector<std::vector<tseq::EventToken>> tokens;
  std::vector<std::vector<int>> target_sets;
  std::vector<tseq::RawSequence> normalized;
};

EncodedData load_encoded(const std::string& path, const tseq::Vocabulary& vocab, double min_gap) {
  EncodedData data;
  for (const auto& raw : tseq::parse_sequences(path)) {
    tseq::RawSequence seq = tseq::normalize_sequence(raw, min_gap);
    data.tokens.push_back(tseq::encode(seq, vocab));
    std::vector<int> targets;
    for (const auto& label : seq.targets) targets.push_back(vocab.lookup(label));
    data.target_sets.push_back(std::move(targets));
    data.normalized.push_back(std::move(seq));
  }
  return data;
}

void check_vocab_overlap(const std::vector<tseq::RawSequence>& data, const tseq::Vocabulary& vocab,
                         const std::string& path) {
  std::set<std::string> seen;
  for (const auto& seq : data)
    for (const auto& e : seq.events)
      if (e.label != tseq::kIdleLabel && e.label != tseq::kOovLabel) seen.insert(e.label);
  if (seen.empty()) return;
  for (const auto& label : seen)
    if (vocab.contains(label)) return;
  throw tseq::ConfigError("vocabulary mismatch: none of the " + std::to_string(seen.size()) +
                          " distinct labels in " + path + " appear in the checkpoint vocabulary");
}

void print_report(const tseq::EvalReport& report) {
  std::printf("steps:            %lld\n", static_cast<long long>(report.steps));
  if (report.examples > 0)
    std::printf("examples:         %lld\n", static_cast<long long>(report.examples));
  std::printf("accuracy:         %.6f\n", report.accuracy);
  for (const auto& [k, v] : report.precision_at_k) std::printf("precision_at_%-4d %.6f\n", k, v);
  for (const auto& [k, v] : report.map_at_k) std::printf("map_at_%-9d %.6f\n", k, v);
  std::printf("event_loss:       %.6f\n", report.event_loss);
  std::printf("duration_mae:     %.6f\n", report.duration_mae);
}

void write_report_kv(const std::string& path, const tseq::EvalReport& report) {
  std::ofstream out(path);
  if (!out) throw tseq::Error("cannot write report: " + path);
  char buf[128];
  auto line = [&](const std::string& key, double v) {
    std::snprintf(buf, sizeof(buf), "%s = %.9g\n", key.c_str(), v);
    out << buf;
  };
  out << "steps = " << report.steps << "\n";
  if (report.examples > 0) out << "examples = " << report.examples << "\n";
  line("accuracy", report.accuracy);
  for (const auto& [k, v] : report.precision_at_k) line("precision_at_" + std::to_string(k), v);
  for (const auto& [k, v] : report.map_at_k) line("map_at_" + std::to_string(k), v);
  line("event_loss", report.event_loss);
  line("duration_mae", report.duration_mae);
}

int cmd_generate(const std::string& config_path, const std::string& out_dir, std::uint64_t seed,
                 const std::string& ratios) {
  const auto config = tseq::SyntheticConfig::from_file(config_path);
  const auto data = tseq::generate_synthetic(config, seed);
  fs::create_directories(out_dir);

  auto split = tseq::split_dataset(data.sequences, parse_ratios(ratios), seed);
  tseq::serialize_sequences((fs::path(out_dir) / "train.jsonl").string(), split.train);
  tseq::serialize_sequences((fs::path(out_dir) / "valid.jsonl").string(), split.valid);
  tseq::serialize_sequences((fs::path(out_dir) / "test.jsonl").string(), split.test);
  data.oracle.save((fs::path(out_dir) / "oracle.json").string());

  std::printf("wrote %zu/%zu/%zu train/valid/test sequences to %s\n", split.train.size(),
              split.valid.size(), split.test.size(), out_dir.c_str());
  std::printf("oracle accuracy (theoretical): %g\n", data.oracle.theoretical_accuracy());
  std::printf("oracle accuracy (empirical):   %g\n", tseq::measure_oracle_accuracy(data));
  return 0;
}

int cmd_prepare(const std::string& input, const std::string& out_dir, std::uint64_t seed,
                const std::string& ratios, double min_gap) {
  auto sequences = tseq::parse_sequences(input);
  for (auto& seq : sequences) seq = tseq::normalize_sequence(seq, min_gap);
  fs::create_directories(out_dir);
  auto split = tseq::split_dataset(std::move(sequences), parse_ratios(ratios), seed);
  tseq::serialize_sequences((fs::path(out_dir) / "train.jsonl").string(), split.train);
  tseq::serialize_sequences((fs::path(out_dir) / "valid.jsonl").string(), split.valid);
  tseq::serialize_sequences((fs::path(out_dir) / "test.jsonl").string(), split.test);
  std::printf("wrote %zu/%zu/%zu train/valid/test sequences to %s\n", split.train.size(),
              split.valid.size(), split.test.size(), out_dir.c_str());
  return 0;
}

struct TrainCliOverrides {
  std::optional<std::string> variant, regularizer, optimizer, duration_head_input;
  std::optional<double> learning_rate, clip_norm, reg_weight, dropout, min_gap;
  std::optional<int> embedding_dim, hidden_dim, context_dim, projection_dim, post_projection_dim;
  std::optional<int> batch_size, unroll_steps, max_epochs, patience, min_count;
  std::optional<std::uint64_t> max_steps;
  bool share_projection = false;
  bool joint_log_input = false;
  bool duration_target_log = false;
  bool exclude_idle_targets = false;
  bool verbose = false;
};

void apply_overrides(tseq::RunConfig& rc, const TrainCliOverrides& o) {
  if (o.variant) rc.model.variant = tseq::variant_from_string(*o.variant);
  if (o.regularizer) rc.model.regularizer = tseq::regularizer_from_string(*o.regularizer);
  if (o.duration_head_input)
    rc.model.duration_head_input = tseq::duration_head_input_from_string(*o.duration_head_input);
  if (o.embedding_dim) rc.model.embedding_dim = *o.embedding_dim;
  if (o.hidden_dim) rc.model.hidden_dim = *o.hidden_dim;
  if (o.context_dim) rc.model.context_dim = *o.context_dim;
  if (o.projection_dim) rc.model.projection_dim = *o.projection_dim;
  if (o.post_projection_dim) rc.model.post_projection_dim = *o.post_projection_dim;
  if (o.reg_weight) rc.model.reg_weight = *o.reg_weight;
  if (o.dropout) rc.model.dropout = *o.dropout;
  if (o.share_projection) rc.model.share_projection_weights = true;
  if (o.joint_log_input) rc.model.joint_log_input = true;
  if (o.duration_target_log) rc.model.duration_target_log = true;
  if (o.optimizer) rc.train.optimizer = tseq::optimizer_from_string(*o.optimizer);
  if (o.learning_rate) rc.train.learning_rate = *o.learning_rate;
  if (o.clip_norm) rc.train.clip_norm = *o.clip_norm;
  if (o.batch_size) rc.train.batch_size = *o.batch_size;
  if (o.unroll_steps) rc.train.unroll_steps = *o.unroll_steps;
  if (o.max_epochs) rc.train.max_epochs = *o.max_epochs;
  if (o.patience) rc.train.patience = *o.patience;
  if (o.max_steps) rc.train.max_steps = *o.max_steps;
  if (o.min_gap) rc.min_gap = *o.min_gap;
  if (o.min_count) rc.min_count = *o.min_count;
  if (o.exclude_idle_targets) rc.train.exclude_idle_targets = true;
  rc.train.verbose = o.verbose;
}

int cmd_train(tseq::RunConfig rc, const std::string& out_path, const std::string& history_path) {
  if (rc.train_path.empty() || rc.valid_path.empty())
    throw tseq::ConfigError("train: data.train and data.valid paths are required");
  if (!fs::exists(rc.train_path)) throw tseq::ConfigError("train: no such file: " + rc.train_path);
  if (!fs::exists(rc.valid_path)) throw tseq::ConfigError("train: no such file: " + rc.valid_path);

  auto train_raw = tseq::parse_sequences(rc.train_path);
  for (auto& seq : train_raw) seq = tseq::normalize_sequence(seq, rc.min_gap);
  const auto vocab = tseq::Vocabulary::build(train_raw, rc.min_count);
  std::printf("vocabulary: %d entries (min_count=%d)\n", vocab.size(), rc.min_count);

  std::vector<std::vector<tseq::EventToken>> train_tokens;
  train_tokens.reserve(train_raw.size());
  for (const auto& seq : train_raw) train_tokens.push_back(tseq::encode(seq, vocab));
  const auto valid = load_encoded(rc.valid_path, vocab, rc.min_gap);

  rc.model.vocab_size = vocab.size();
  rc.model.validate();
  rc.train.validate();

  tseq::Model<Real> model(rc.model, vocab);
  model.init(rc.train.seed);
  const auto result = tseq::train(model, train_tokens, valid.tokens, rc.train);

  tseq::save_checkpoint(out_path, model, result.sigma);
  const std::string hist = history_path.empty() ? out_path + ".history.csv" : history_path;
  tseq::write_history_csv(hist, result.history);
  std::printf("best epoch %d (valid loss %.6f) after %llu steps\n", result.best_epoch,
              result.best_valid_loss, static_cast<unsigned long long>(result.steps));
  std::printf("checkpoint: %s\nhistory: %s\n", out_path.c_str(), hist.c_str());
  return 0;
}

int cmd_evaluate(const std::string& checkpoint, const std::string& data_path,
                 const std::string& k_list, const std::string& out_path, bool exclude_idle,
                 bool exclude_history, double min_gap) {
  auto [cp, model] = tseq::load_model<Real>(checkpoint);
  const auto data = load_encoded(data_path, model.vocab(), min_gap);
  check_vocab_overlap(data.normalized, model.vocab(), data_path);

  tseq::EvalOptions opts;
  opts.k_list = parse_k_list(k_list);
  opts.exclude_idle_targets = exclude_idle;
  opts.exclude_history = exclude_history;
  const auto report = tseq::evaluate(model, data.tokens, data.target_sets, opts);
  print_report(report);
  if (!out_path.empty()) write_report_kv(out_path, report);
  return 0;
}

int cmd_predict(const std::string& checkpoint, const std::string& events_path, int k,
                bool exclude_idle, double min_gap) {
  auto [cp, model] = tseq::load_model<Real>(checkpoint);
  const auto sequences = tseq::parse_sequences(events_path);
  if (sequences.empty()) throw tseq::ConfigError("predict: no sequences in " + events_path);

  for (const auto& raw : sequences) {
    const auto seq = tseq::normalize_sequence(raw, min_gap);
    if (seq.events.empty()) {
      std::fprintf(stderr, "warning: sequence %s is empty, skipped\n", seq.id.c_str());
      continue;
    }
    int unknown = 0;
    for (const auto& e : seq.events) unknown += !model.vocab().contains(e.label);
    if (unknown > 0)
      std::fprintf(stderr, "warning: sequence %s: %d unknown label(s) mapped to OOV\n",
                   seq.id.c_str(), unknown);

    const auto tokens = tseq::encode(seq, model.vocab());
    const auto outputs = model.forward(tokens);
    const auto& logits = outputs.back().event_logits;
    const auto probs = tseq::softmax(logits);
    std::unordered_set<int> exclude;
    if (exclude_idle) exclude.insert(tseq::Vocabulary::kIdleIndex);
    const auto ranked = tseq::predict_topk(logits, k, exclude.empty() ? nullptr : &exclude);
    std::printf("%s:\n", seq.id.c_str());
    for (int idx : ranked)
      std::printf("  %-24s %.6f\n", model.vocab().label(idx).c_str(),
                  static_cast<double>(probs[static_cast<std::size_t>(idx)]));
  }
  return 0;
}

int cmd_inspect_projection(const std::string& checkpoint, double d_min, double d_max,
                           int num_points, const std::string& scale, const std::string& out_path) {
  auto [cp, model] = tseq::load_model<Real>(checkpoint);
  if (model.config().variant != tseq::Variant::kTimeJoint)
    throw tseq::ConfigError("inspect-projection requires a time_joint checkpoint (got " +
                            to_string(model.config().variant) + ")");
  if (scale != "linear" && scale != "log")
    throw tseq::ConfigError("--scale must be linear or log");

  const auto grid = tseq::probe_grid(d_min, d_max, num_points, scale == "log");
  const auto params = model.time_joint_params();
  const auto rows = tseq::inspect_projection(params, grid, model.config().joint_log_input);

  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!out_path.empty()) {
    file.open(out_path);
    if (!file) throw tseq::Error("cannot write CSV: " + out_path);
    out = &file;
  }
  *out << "d_seconds";
  for (int i = 1; i <= model.config().projection_dim; ++i) *out << ",s_" << i;
  *out << "\n";
  char buf[64];
  for (const auto& [d, soft] : rows) {
    std::snprintf(buf, sizeof(buf), "%.9g", d);
    *out << buf;
    for (Real v : soft) {
      std::snprintf(buf, sizeof(buf), ",%.9g", static_cast<double>(v));
      *out << buf;
    }
    *out << "\n";
  }
  if (!out_path.empty()) std::printf("wrote %zu rows to %s\n", rows.size(), out_path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"time-dependent event sequence prediction"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  app.add_option("--seed", seed, "master random seed")->capture_default_str();

  // generate
  auto* gen = app.add_subcommand("generate", "generate synthetic benchmark data");
  std::string gen_config, gen_out = "data", gen_ratios = "0.8,0.1,0.1";
  gen->add_option("--config", gen_config, "generator config file")->required();
  gen->add_option("--out", gen_out, "output directory")->capture_default_str();
  gen->add_option("--ratios", gen_ratios, "train/valid/test ratios")->capture_default_str();

  // prepare
  auto* prep = app.add_subcommand("prepare", "normalize and split a raw sequence file");
  std::string prep_input, prep_out = "data", prep_ratios = "0.8,0.1,0.1";
  double prep_min_gap = tseq::kDefaultMinGap;
  prep->add_option("--input", prep_input, "raw JSON Lines file")->required();
  prep->add_option("--out", prep_out, "output directory")->capture_default_str();
  prep->add_option("--ratios", prep_ratios, "train/valid/test ratios")->capture_default_str();
  prep->add_option("--min-gap", prep_min_gap, "idle injection threshold, seconds")
      ->capture_default_str();

  // train
  auto* tr = app.add_subcommand("train", "train a model");
  std::string tr_config, tr_train, tr_valid, tr_out = "model.tseq", tr_history;
  TrainCliOverrides o;
  tr->add_option("--config", tr_config, "run config file (key = value)");
  tr->add_option("--train", tr_train, "training JSON Lines file (overrides data.train)");
  tr->add_option("--valid", tr_valid, "validation JSON Lines file (overrides data.valid)");
  tr->add_option("--out", tr_out, "checkpoint output path")->capture_default_str();
  tr->add_option("--history", tr_history, "history CSV path (default: <out>.history.csv)");
  tr->add_option("--variant", o.variant, "no_time|time_concat|time_mask|time_joint");
  tr->add_option("--regularizer", o.regularizer, "none|nll|xent");
  tr->add_option("--optimizer", o.optimizer, "sgd|adagrad|adam");
  tr->add_option("--duration-head-input", o.duration_head_input,
                 "recurrent|recurrent_plus_hidden");
  tr->add_option("--learning-rate", o.learning_rate);
  tr->add_option("--clip-norm", o.clip_norm);
  tr->add_option("--reg-weight", o.reg_weight, "regularizer weight (lambda)");
  tr->add_option("--dropout", o.dropout);
  tr->add_option("--embedding-dim", o.embedding_dim);
  tr->add_option("--hidden-dim", o.hidden_dim);
  tr->add_option("--context-dim", o.context_dim);
  tr->add_option("--projection-dim", o.projection_dim);
  tr->add_option("--post-projection-dim", o.post_projection_dim);
  tr->add_option("--batch-size", o.batch_size);
  tr->add_option("--unroll-steps", o.unroll_steps);
  tr->add_option("--max-epochs", o.max_epochs);
  tr->add_option("--patience", o.patience);
  tr->add_option("--max-steps", o.max_steps);
  tr->add_option("--min-gap", o.min_gap, "idle injection threshold, seconds");
  tr->add_option("--min-count", o.min_count, "OOV threshold");
  tr->add_flag("--share-projection", o.share_projection,
               "share the R^X projection with the time_joint embedding");
  tr->add_flag("--joint-log-input", o.joint_log_input, "feed log d into the joint projection");
  tr->add_flag("--duration-target-log", o.duration_target_log, "regress log durations");
  tr->add_flag("--exclude-idle-targets", o.exclude_idle_targets,
               "mask idle events out of the prediction targets");
  tr->add_flag("--verbose", o.verbose, "per-epoch progress on stderr");

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "evaluate a checkpoint");
  std::string ev_checkpoint, ev_data, ev_k = "1,5,10,20", ev_out;
  bool ev_exclude_idle = false, ev_exclude_history = false;
  double ev_min_gap = tseq::kDefaultMinGap;
  ev->add_option("--checkpoint", ev_checkpoint)->required();
  ev->add_option("--data", ev_data, "JSON Lines file to score")->required();
  ev->add_option("--k", ev_k, "comma-separated K list")->capture_default_str();
  ev->add_option("--out", ev_out, "write a key = value report here");
  ev->add_option("--min-gap", ev_min_gap)->capture_default_str();
  ev->add_flag("--exclude-idle-targets", ev_exclude_idle);
  ev->add_flag("--exclude-history", ev_exclude_history,
               "recommendation mode: rank only unseen events");

  // predict
  auto* pr = app.add_subcommand("predict", "rank next events for a history");
  std::string pr_checkpoint, pr_events;
  int pr_k = 5;
  bool pr_exclude_idle = false;
  double pr_min_gap = tseq::kDefaultMinGap;
  pr->add_option("--checkpoint", pr_checkpoint)->required();
  pr->add_option("--history", pr_events, "JSON Lines file of event histories")->required();
  pr->add_option("--k", pr_k, "number of predictions")->capture_default_str();
  pr->add_option("--min-gap", pr_min_gap)->capture_default_str();
  pr->add_flag("--exclude-idle", pr_exclude_idle, "never predict the idle event");

  // inspect-projection
  auto* ip = app.add_subcommand("inspect-projection", "dump the learned soft one-hot projection");
  std::string ip_checkpoint, ip_scale = "log", ip_out;
  double ip_min = 0.1, ip_max = 10000.0;
  int ip_points = 100;
  ip->add_option("--checkpoint", ip_checkpoint)->required();
  ip->add_option("--min", ip_min, "smallest probed duration, seconds")->capture_default_str();
  ip->add_option("--max", ip_max, "largest probed duration, seconds")->capture_default_str();
  ip->add_option("--points", ip_points, "number of probes")->capture_default_str();
  ip->add_option("--scale", ip_scale, "linear|log")->capture_default_str();
  ip->add_option("--out", ip_out, "CSV output path (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) return cmd_generate(gen_config, gen_out, seed, gen_ratios);
    if (prep->parsed()) return cmd_prepare(prep_input, prep_out, seed, prep_ratios, prep_min_gap);
    if (tr->parsed()) {
      tseq::RunConfig rc = tr_config.empty() ? tseq::RunConfig() : tseq::RunConfig::from_file(tr_config);
      apply_overrides(rc, o);
      if (!tr_train.empty()) rc.train_path = tr_train;
      if (!tr_valid.empty()) rc.valid_path = tr_valid;
      if (app.count("--seed") > 0) rc.train.seed = seed;
      return cmd_train(std::move(rc), tr_out, tr_history);
    }
    if (ev->parsed())
      return cmd_evaluate(ev_checkpoint, ev_data, ev_k, ev_out, ev_exclude_idle,
                          ev_exclude_history, ev_min_gap);
    if (pr->parsed()) return cmd_predict(pr_checkpoint, pr_events, pr_k, pr_exclude_idle, pr_min_gap);
    if (ip->parsed())
      return cmd_inspect_projection(ip_checkpoint, ip_min, ip_max, ip_points, ip_scale, ip_out);
  } catch (const tseq::ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
