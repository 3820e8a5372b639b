// Copyright 2026 The MGPN Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line front end. Uses the C interface only.
//
// Exit codes: 0 ok, 1 usage, 2 data/format error, 3 verification failure.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include <CLI11.hpp>

#include "mgpn/mgpn.h"

namespace {

struct Failure {
  mgpn_status status;
};

void check(mgpn_status s) {
  if (s != MGPN_OK) throw Failure{s};
}

std::string take(char* s) {
  std::string out = s ? s : "";
  mgpn_string_free(s);
  return out;
}

struct ConfigDeleter {
  void operator()(mgpn_config* c) const { mgpn_config_free(c); }
};
struct DatasetDeleter {
  void operator()(mgpn_dataset* d) const { mgpn_dataset_free(d); }
};
struct ModelDeleter {
  void operator()(mgpn_model* m) const { mgpn_model_free(m); }
};
using ConfigPtr = std::unique_ptr<mgpn_config, ConfigDeleter>;
using DatasetPtr = std::unique_ptr<mgpn_dataset, DatasetDeleter>;
using ModelPtr = std::unique_ptr<mgpn_model, ModelDeleter>;

// --config file (all keys required) or defaults, then --set key=value pairs.
struct ConfigFlags {
  std::string file;
  std::vector<std::string> sets;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", file, "Config file with every key");
    cmd->add_option("--set", sets, "Override, key=value (repeatable)");
  }

  ConfigPtr build(const std::vector<std::pair<std::string, std::string>>& extra = {}) const {
    mgpn_config* raw = nullptr;
    if (file.empty()) check(mgpn_config_new(&raw));
    else check(mgpn_config_load(file.c_str(), 1, &raw));
    ConfigPtr cfg(raw);
    for (const auto& [k, v] : extra) check(mgpn_config_set(cfg.get(), k.c_str(), v.c_str()));
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw CLI::ValidationError("--set", "expected key=value: " + kv);
      auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t"), e = s.find_last_not_of(" \t");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
      };
      check(mgpn_config_set(cfg.get(), trim(kv.substr(0, eq)).c_str(),
                            trim(kv.substr(eq + 1)).c_str()));
    }
    return cfg;
  }
};

template <typename T>
void push_if(std::vector<std::pair<std::string, std::string>>& v, const char* key,
             const std::optional<T>& value) {
  if (!value) return;
  if constexpr (std::is_same_v<T, std::string>) v.emplace_back(key, *value);
  else {
    std::ostringstream s;
    s.precision(17);
    s << *value;
    v.emplace_back(key, s.str());
  }
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  f << text;
  if (!f) {
    std::cerr << "error: cannot write " << path << "\n";
    throw Failure{MGPN_ERR_DATA};
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-granularity moment retrieval"};
  app.require_subcommand(1);

  // synth-data
  auto* synth = app.add_subcommand("synth-data", "Write a synthetic planted-span dataset");
  mgpn_synth_spec spec;
  mgpn_synth_spec_default(&spec);
  std::optional<int> synth_train;
  std::string synth_out;
  synth->add_option("--samples", spec.num_samples, "Number of samples")->capture_default_str();
  synth->add_option("--train", synth_train, "Samples in train.txt (default 80%)");
  synth->add_option("--tv", spec.clips, "Clips per video")->capture_default_str();
  synth->add_option("--dv", spec.feature_dim, "Clip feature dimension")->capture_default_str();
  synth->add_option("--vocab", spec.vocab_size, "Vocabulary size")->capture_default_str();
  synth->add_option("--qlen-min", spec.query_len_min)->capture_default_str();
  synth->add_option("--qlen-max", spec.query_len_max)->capture_default_str();
  synth->add_option("--span-min", spec.span_frac_min, "Min span / duration")->capture_default_str();
  synth->add_option("--span-max", spec.span_frac_max, "Max span / duration")->capture_default_str();
  synth->add_option("--noise", spec.noise_std, "Gaussian noise std")->capture_default_str();
  synth->add_option("--seed", spec.seed)->capture_default_str();
  synth->add_option("--word-dim", spec.word_dim)->capture_default_str();
  synth->add_option("--out", synth_out, "Output directory")->required();

  // train
  auto* train = app.add_subcommand("train", "Train a model");
  ConfigFlags train_cfg;
  train_cfg.attach(train);
  std::string train_data, train_split = "train";
  std::optional<int> epochs, batch_size;
  std::optional<double> lr;
  std::optional<std::uint64_t> train_seed;
  std::optional<std::string> ckpt_dir;
  train->add_option("--data", train_data, "Dataset directory")->required();
  train->add_option("--split", train_split)->capture_default_str();
  train->add_option("--epochs", epochs);
  train->add_option("--lr", lr);
  train->add_option("--batch-size", batch_size);
  train->add_option("--seed", train_seed);
  train->add_option("--out", ckpt_dir, "Checkpoint directory");

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  ConfigFlags eval_cfg;
  eval->add_option("--set", eval_cfg.sets, "eval.* override, key=value (repeatable)");
  std::string eval_ckpt, eval_data, eval_split = "test", eval_dump = "predictions.txt";
  eval->add_option("--checkpoint", eval_ckpt)->required();
  eval->add_option("--data", eval_data)->required();
  eval->add_option("--split", eval_split)->capture_default_str();
  eval->add_option("--dump", eval_dump, "Prediction dump path")->capture_default_str();

  // predict
  auto* predict = app.add_subcommand("predict", "Top-k spans for one query");
  std::string pred_ckpt, pred_data, pred_split = "test", pred_video, pred_query;
  std::optional<int> pred_index;
  double pred_duration = 0.0, pred_nms = 0.49;
  int pred_k = 5;
  predict->add_option("--checkpoint", pred_ckpt)->required();
  predict->add_option("--data", pred_data)->required();
  predict->add_option("--split", pred_split)->capture_default_str();
  predict->add_option("--index", pred_index, "Record of the split to run");
  predict->add_option("--video", pred_video);
  predict->add_option("--query", pred_query);
  predict->add_option("--duration", pred_duration);
  predict->add_option("--k", pred_k)->capture_default_str();
  predict->add_option("--nms", pred_nms)->capture_default_str();

  // inspect-map
  auto* inspect = app.add_subcommand("inspect-map", "Print the candidate validity mask");
  int inspect_T = 16;
  std::string inspect_scheme = "sparse";
  inspect->add_option("--T", inspect_T)->capture_default_str();
  inspect->add_option("--scheme", inspect_scheme)->capture_default_str();

  // grad-check
  auto* grad = app.add_subcommand("grad-check", "Finite-difference gradient check");
  ConfigFlags grad_cfg;
  grad_cfg.attach(grad);
  int g_T = 4, g_C = 32, g_groups = 4, g_L = 3;
  double g_eps = 1e-5, g_tol = 1e-4;
  std::uint64_t g_seed = 3;
  grad->add_option("--T", g_T)->capture_default_str();
  grad->add_option("--C", g_C)->capture_default_str();
  grad->add_option("--groups", g_groups)->capture_default_str();
  grad->add_option("--L", g_L)->capture_default_str();
  grad->add_option("--epsilon", g_eps)->capture_default_str();
  grad->add_option("--tolerance", g_tol)->capture_default_str();
  grad->add_option("--seed", g_seed)->capture_default_str();

  // param-count
  auto* pcount = app.add_subcommand("param-count", "Per-module parameter counts");
  ConfigFlags pcount_cfg;
  pcount_cfg.attach(pcount);
  int pcount_dv = 4096;
  pcount->add_option("--feature-dim", pcount_dv, "Used when model.feature_dim is 0")
      ->capture_default_str();

  // config
  auto* show = app.add_subcommand("config", "Print the effective configuration");
  ConfigFlags show_cfg;
  show_cfg.attach(show);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? 0 : MGPN_ERR_USAGE;
  }

  try {
    if (*synth) {
      if (spec.num_samples < 1) throw CLI::ValidationError("--samples", "must be >= 1");
      spec.num_train = synth_train ? *synth_train : spec.num_samples * 4 / 5;
      check(mgpn_synth_data(&spec, synth_out.c_str()));
      std::cout << "wrote " << spec.num_samples << " samples (" << spec.num_train
                << " train) to " << synth_out << "\n";
    } else if (*train) {
      std::vector<std::pair<std::string, std::string>> extra;
      push_if(extra, "train.epochs", epochs);
      push_if(extra, "train.lr", lr);
      push_if(extra, "train.batch_size", batch_size);
      push_if(extra, "train.seed", train_seed);
      push_if(extra, "train.checkpoint_dir", ckpt_dir);
      auto cfg = train_cfg.build();
      for (const auto& [k, v] : extra) check(mgpn_config_set(cfg.get(), k.c_str(), v.c_str()));
      mgpn_dataset* ds_raw = nullptr;
      check(mgpn_dataset_open(train_data.c_str(), train_split.c_str(), cfg.get(), &ds_raw));
      DatasetPtr ds(ds_raw);
      char* text = nullptr;
      check(mgpn_config_to_string(cfg.get(), &text));
      std::cout << take(text) << std::flush;
      check(mgpn_train(cfg.get(), ds.get(),
                       [](const char* line, void*) { std::cout << line << std::endl; }, nullptr));
    } else if (*eval) {
      mgpn_model* m_raw = nullptr;
      check(mgpn_model_load(eval_ckpt.c_str(), &m_raw));
      ModelPtr model(m_raw);
      mgpn_config* c_raw = nullptr;
      check(mgpn_model_config(model.get(), &c_raw));
      ConfigPtr cfg(c_raw);
      for (const auto& kv : eval_cfg.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw CLI::ValidationError("--set", "expected key=value");
        check(mgpn_config_set(cfg.get(), kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str()));
      }
      mgpn_dataset* ds_raw = nullptr;
      check(mgpn_dataset_open(eval_data.c_str(), eval_split.c_str(), cfg.get(), &ds_raw));
      DatasetPtr ds(ds_raw);
      char* table = nullptr;
      char* dump = nullptr;
      check(mgpn_evaluate(model.get(), ds.get(), cfg.get(), &table, &dump));
      std::cout << take(table);
      write_file(eval_dump, take(dump));
    } else if (*predict) {
      mgpn_model* m_raw = nullptr;
      check(mgpn_model_load(pred_ckpt.c_str(), &m_raw));
      ModelPtr model(m_raw);
      char* out = nullptr;
      if (pred_index) {
        mgpn_config* c_raw = nullptr;
        check(mgpn_model_config(model.get(), &c_raw));
        ConfigPtr cfg(c_raw);
        mgpn_dataset* ds_raw = nullptr;
        check(mgpn_dataset_open(pred_data.c_str(), pred_split.c_str(), cfg.get(), &ds_raw));
        DatasetPtr ds(ds_raw);
        check(mgpn_predict_sample(model.get(), ds.get(), *pred_index, pred_k, pred_nms, &out));
      } else {
        if (pred_video.empty() || pred_query.empty() || pred_duration <= 0)
          throw CLI::ValidationError("predict", "give --index, or --video, --query and --duration");
        check(mgpn_predict(model.get(), pred_data.c_str(), pred_video.c_str(), pred_query.c_str(),
                           pred_duration, pred_k, pred_nms, &out));
      }
      std::cout << take(out);
    } else if (*inspect) {
      char* out = nullptr;
      check(mgpn_render_grid(inspect_T, inspect_scheme.c_str(), &out));
      std::cout << take(out);
    } else if (*grad) {
      auto cfg = grad_cfg.build({{"model.T", std::to_string(g_T)},
                                 {"model.C", std::to_string(g_C)},
                                 {"model.groups", std::to_string(g_groups)},
                                 {"model.L_max", std::to_string(g_L)}});
      double err = 0.0;
      char* report = nullptr;
      const auto s = mgpn_grad_check(cfg.get(), g_eps, g_seed, g_tol, &err, &report);
      std::cout << take(report);
      if (s == MGPN_ERR_VERIFY) std::cout << "FAIL: tolerance " << g_tol << "\n";
      else if (s == MGPN_OK) std::cout << "OK: tolerance " << g_tol << "\n";
      check(s);
    } else if (*pcount) {
      auto cfg = pcount_cfg.build();
      mgpn_model* m_raw = nullptr;
      char* dv = nullptr;
      check(mgpn_config_get(cfg.get(), "model.feature_dim", &dv));
      const int feature_dim = take(dv) == "0" ? pcount_dv : 0;
      check(mgpn_model_create(cfg.get(), feature_dim, 1, &m_raw));
      ModelPtr model(m_raw);
      char* out = nullptr;
      check(mgpn_model_param_report(model.get(), &out));
      std::cout << take(out);
    } else if (*show) {
      auto cfg = show_cfg.build();
      char* out = nullptr;
      check(mgpn_config_to_string(cfg.get(), &out));
      std::cout << take(out);
    }
  } catch (const Failure& f) {
    std::cerr << "error: " << mgpn_last_error() << "\n";
    return static_cast<int>(f.status);
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return MGPN_ERR_USAGE;
  }
  return 0;
}
