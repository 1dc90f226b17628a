#pragma once

#include <set>
#include <string>

#include "tseq/common.hpp"
#include "tseq/dataio.hpp"
#include "tseq/kvfile.hpp"
#include "tseq/model.hpp"
#include "tseq/trainer.hpp"

namespace tseq {

// Merged model/train/data configuration, parsed from a key-value file with
// dotted section prefixes. Unknown keys are rejected.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  std::string train_path, valid_path, test_path;
  double min_gap = kDefaultMinGap;
  int min_count = 5;

  static const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = {
        "model.variant",
        "model.regularizer",
        "model.embedding_dim",
        "model.hidden_dim",
        "model.context_dim",
        "model.projection_dim",
        "model.post_projection_dim",
        "model.share_projection_weights",
        "model.duration_head_input",
        "model.joint_log_input",
        "model.duration_head_linear",
        "model.duration_target_log",
        "model.reg_weight",
        "model.dropout",
        "train.optimizer",
        "train.learning_rate",
        "train.clip_norm",
        "train.batch_size",
        "train.unroll_steps",
        "train.max_epochs",
        "train.patience",
        "train.max_steps",
        "train.seed",
        "train.shuffle",
        "train.exclude_idle_targets",
        "data.train",
        "data.valid",
        "data.test",
        "data.min_gap",
        "data.min_count",
    };
    return keys;
  }

  static RunConfig from_kv(const KvFile& kv) {
    kv.reject_unknown_keys(known_keys());
    RunConfig rc;
    rc.model.variant = variant_from_string(kv.get_string("model.variant", to_string(rc.model.variant)));
    rc.model.regularizer =
        regularizer_from_string(kv.get_string("model.regularizer", to_string(rc.model.regularizer)));
    rc.model.embedding_dim = static_cast<int>(kv.get_int("model.embedding_dim", rc.model.embedding_dim));
    rc.model.hidden_dim = static_cast<int>(kv.get_int("model.hidden_dim", rc.model.hidden_dim));
    rc.model.context_dim = static_cast<int>(kv.get_int("model.context_dim", rc.model.context_dim));
    rc.model.projection_dim =
        static_cast<int>(kv.get_int("model.projection_dim", rc.model.projection_dim));
    rc.model.post_projection_dim =
        static_cast<int>(kv.get_int("model.post_projection_dim", rc.model.post_projection_dim));
    rc.model.share_projection_weights =
        kv.get_bool("model.share_projection_weights", rc.model.share_projection_weights);
    rc.model.duration_head_input = duration_head_input_from_string(
        kv.get_string("model.duration_head_input", to_string(rc.model.duration_head_input)));
    rc.model.joint_log_input = kv.get_bool("model.joint_log_input", rc.model.joint_log_input);
    rc.model.duration_head_linear =
        kv.get_bool("model.duration_head_linear", rc.model.duration_head_linear);
    rc.model.duration_target_log =
        kv.get_bool("model.duration_target_log", rc.model.duration_target_log);
    rc.model.reg_weight = kv.get_double("model.reg_weight", rc.model.reg_weight);
    rc.model.dropout = kv.get_double("model.dropout", rc.model.dropout);

    rc.train.optimizer =
        optimizer_from_string(kv.get_string("train.optimizer", to_string(rc.train.optimizer)));
    rc.train.learning_rate = kv.get_double("train.learning_rate", rc.train.learning_rate);
    rc.train.clip_norm = kv.get_double("train.clip_norm", rc.train.clip_norm);
    rc.train.batch_size = static_cast<int>(kv.get_int("train.batch_size", rc.train.batch_size));
    rc.train.unroll_steps = static_cast<int>(kv.get_int("train.unroll_steps", rc.train.unroll_steps));
    rc.train.max_epochs = static_cast<int>(kv.get_int("train.max_epochs", rc.train.max_epochs));
    rc.train.patience = static_cast<int>(kv.get_int("train.patience", rc.train.patience));
    rc.train.max_steps =
        static_cast<std::uint64_t>(kv.get_int("train.max_steps", static_cast<std::int64_t>(rc.train.max_steps)));
    rc.train.seed = static_cast<std::uint64_t>(kv.get_int("train.seed", static_cast<std::int64_t>(rc.train.seed)));
    rc.train.shuffle = kv.get_bool("train.shuffle", rc.train.shuffle);
    rc.train.exclude_idle_targets =
        kv.get_bool("train.exclude_idle_targets", rc.train.exclude_idle_targets);

    rc.train_path = kv.get_string("data.train", "");
    rc.valid_path = kv.get_string("data.valid", "");
    rc.test_path = kv.get_string("data.test", "");
    rc.min_gap = kv.get_double("data.min_gap", rc.min_gap);
    rc.min_count = static_cast<int>(kv.get_int("data.min_count", rc.min_count));
    return rc;
  }

  static RunConfig from_file(const std::string& path) {
    return from_kv(KvFile::parse_file(path));
  }
};

}  // namespace tseq
