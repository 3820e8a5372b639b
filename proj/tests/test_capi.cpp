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


#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "mgpn/mgpn.h"

namespace fs = std::filesystem;

namespace {

std::string take(char* s) {
  std::string out = s ? s : "";
  mgpn_string_free(s);
  return out;
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("mgpn_capi_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

mgpn_config* small_config(const fs::path& ckpt) {
  mgpn_config* cfg = nullptr;
  REQUIRE(mgpn_config_new(&cfg) == MGPN_OK);
  const std::pair<const char*, const char*> kv[] = {
      {"model.T", "8"},          {"model.C", "8"},        {"model.groups", "2"},
      {"model.comparison_blocks", "1"}, {"model.kernel", "3"}, {"model.padding", "1"},
      {"model.word_dim", "6"},   {"train.epochs", "2"},   {"train.batch_size", "4"}};
  for (auto [k, v] : kv) REQUIRE(mgpn_config_set(cfg, k, v) == MGPN_OK);
  REQUIRE(mgpn_config_set(cfg, "train.checkpoint_dir", ckpt.string().c_str()) == MGPN_OK);
  return cfg;
}

void make_data(const fs::path& dir) {
  mgpn_synth_spec spec;
  mgpn_synth_spec_default(&spec);
  spec.num_samples = 12;
  spec.num_train = 8;
  spec.feature_dim = 8;
  spec.word_dim = 6;
  REQUIRE(mgpn_synth_data(&spec, dir.string().c_str()) == MGPN_OK);
}

}  // namespace

TEST_CASE("config get, set and errors") {
  mgpn_config* cfg = nullptr;
  REQUIRE(mgpn_config_new(&cfg) == MGPN_OK);
  CHECK(mgpn_config_set(cfg, "model.C", "64") == MGPN_OK);
  char* v = nullptr;
  REQUIRE(mgpn_config_get(cfg, "model.C", &v) == MGPN_OK);
  CHECK(take(v) == "64");
  CHECK(mgpn_config_set(cfg, "model.nope", "1") == MGPN_ERR_USAGE);
  CHECK(std::string(mgpn_last_error()).find("model.nope") != std::string::npos);
  CHECK(mgpn_config_set(cfg, "model.C", "abc") == MGPN_ERR_USAGE);
  char* text = nullptr;
  REQUIRE(mgpn_config_to_string(cfg, &text) == MGPN_OK);
  CHECK(take(text).find("model.C = 64") != std::string::npos);
  mgpn_config_free(cfg);
  mgpn_config_free(nullptr);
  mgpn_model_free(nullptr);
  mgpn_dataset_free(nullptr);
}

TEST_CASE("config file with a missing key names it") {
  const auto dir = scratch("cfg");
  mgpn_config* cfg = nullptr;
  REQUIRE(mgpn_config_new(&cfg) == MGPN_OK);
  char* text = nullptr;
  REQUIRE(mgpn_config_to_string(cfg, &text) == MGPN_OK);
  std::string all = take(text);
  mgpn_config_free(cfg);
  const auto pos = all.find("train.lr");
  const auto end = all.find('\n', pos);
  std::ofstream(dir / "partial.cfg") << all.substr(0, pos) << all.substr(end + 1);
  std::ofstream(dir / "full.cfg") << all;
  mgpn_config* loaded = nullptr;
  CHECK(mgpn_config_load((dir / "full.cfg").string().c_str(), 1, &loaded) == MGPN_OK);
  mgpn_config_free(loaded);
  CHECK(mgpn_config_load((dir / "partial.cfg").string().c_str(), 1, &loaded) == MGPN_ERR_USAGE);
  CHECK(std::string(mgpn_last_error()).find("train.lr") != std::string::npos);
  CHECK(mgpn_config_load((dir / "partial.cfg").string().c_str(), 0, &loaded) == MGPN_OK);
  mgpn_config_free(loaded);
}

TEST_CASE("synthetic data argument errors") {
  mgpn_synth_spec spec;
  mgpn_synth_spec_default(&spec);
  spec.num_samples = 0;
  CHECK(mgpn_synth_data(&spec, scratch("bad").string().c_str()) == MGPN_ERR_USAGE);
  mgpn_synth_spec_default(&spec);
  spec.num_train = spec.num_samples + 1;
  CHECK(mgpn_synth_data(&spec, scratch("bad2").string().c_str()) == MGPN_ERR_USAGE);
}

TEST_CASE("train, save, load, evaluate and predict") {
  const auto dir = scratch("flow");
  make_data(dir / "data");
  mgpn_config* cfg = small_config(dir / "ckpt");
  mgpn_dataset* train = nullptr;
  REQUIRE(mgpn_dataset_open((dir / "data").string().c_str(), "train", cfg, &train) == MGPN_OK);
  CHECK(mgpn_dataset_size(train) == 8);
  CHECK(mgpn_dataset_feature_dim(train) == 8);

  std::vector<std::string> lines;
  auto log = [](const char* line, void* user) {
    static_cast<std::vector<std::string>*>(user)->push_back(line);
  };
  REQUIRE(mgpn_train(cfg, train, log, &lines) == MGPN_OK);
  REQUIRE(lines.size() == 2);
  CHECK(lines[0].rfind("epoch 1 loss ", 0) == 0);
  CHECK(fs::exists(dir / "ckpt" / "init.mgpc"));
  CHECK(fs::exists(dir / "ckpt" / "final.mgpc"));
  CHECK(fs::exists(dir / "ckpt" / "train.log"));

  mgpn_model* model = nullptr;
  REQUIRE(mgpn_model_load((dir / "ckpt" / "final.mgpc").string().c_str(), &model) == MGPN_OK);
  CHECK(mgpn_model_param_count(model) > 0);
  char* report = nullptr;
  REQUIRE(mgpn_model_param_report(model, &report) == MGPN_OK);
  CHECK(take(report).find("total") != std::string::npos);

  mgpn_dataset* test = nullptr;
  REQUIRE(mgpn_dataset_open((dir / "data").string().c_str(), "test", cfg, &test) == MGPN_OK);
  char *table = nullptr, *dump = nullptr;
  REQUIRE(mgpn_evaluate(model, test, nullptr, &table, &dump) == MGPN_OK);
  const std::string t = take(table), d = take(dump);
  CHECK(t.rfind("metric\tR@1\tR@5\n", 0) == 0);
  CHECK(std::count(d.begin(), d.end(), '\n') >= 4);

  char* out = nullptr;
  REQUIRE(mgpn_predict_sample(model, test, 0, 3, 0.49, &out) == MGPN_OK);
  CHECK(!take(out).empty());
  CHECK(mgpn_predict_sample(model, test, 99, 3, 0.49, &out) == MGPN_ERR_USAGE);
  CHECK(mgpn_predict_sample(model, test, 0, 0, 0.49, &out) == MGPN_ERR_USAGE);

  // Save and reload gives the same evaluation.
  const auto copy = dir / "copy.mgpc";
  REQUIRE(mgpn_model_save(model, copy.string().c_str()) == MGPN_OK);
  mgpn_model* again = nullptr;
  REQUIRE(mgpn_model_load(copy.string().c_str(), &again) == MGPN_OK);
  REQUIRE(mgpn_evaluate(again, test, nullptr, &table, &dump) == MGPN_OK);
  CHECK(take(table) == t);
  CHECK(take(dump) == d);

  mgpn_model_free(again);
  mgpn_model_free(model);
  mgpn_dataset_free(test);
  mgpn_dataset_free(train);
  mgpn_config_free(cfg);
}

TEST_CASE("bad inputs map to data errors") {
  const auto dir = scratch("errs");
  std::ofstream(dir / "junk.mgpc") << "not a checkpoint";
  mgpn_model* model = nullptr;
  CHECK(mgpn_model_load((dir / "junk.mgpc").string().c_str(), &model) == MGPN_ERR_DATA);
  CHECK(std::string(mgpn_last_error()).find("magic") != std::string::npos);
  CHECK(mgpn_model_load((dir / "absent.mgpc").string().c_str(), &model) == MGPN_ERR_DATA);
  mgpn_config* cfg = nullptr;
  REQUIRE(mgpn_config_new(&cfg) == MGPN_OK);
  mgpn_dataset* ds = nullptr;
  CHECK(mgpn_dataset_open((dir / "nowhere").string().c_str(), "train", cfg, &ds) == MGPN_ERR_DATA);
  mgpn_config_free(cfg);
}

TEST_CASE("grid rendering") {
  char* out = nullptr;
  REQUIRE(mgpn_render_grid(4, "dense", &out) == MGPN_OK);
  const std::string s = take(out);
  CHECK(std::count(s.begin(), s.end(), '#') == 10);
  CHECK(s.find("N_A = 10") != std::string::npos);
  REQUIRE(mgpn_render_grid(4, "sparse", &out) == MGPN_OK);
  CHECK(take(out).find("N_A = 7") != std::string::npos);
  CHECK(mgpn_render_grid(4, "diagonal", &out) == MGPN_ERR_USAGE);
}

TEST_CASE("gradient check through the C interface") {
  mgpn_config* cfg = nullptr;
  REQUIRE(mgpn_config_new(&cfg) == MGPN_OK);
  for (auto [k, v] : {std::pair{"model.T", "4"}, {"model.C", "32"}, {"model.groups", "4"},
                      {"model.L_max", "3"}})
    REQUIRE(mgpn_config_set(cfg, k, v) == MGPN_OK);
  double err = 1.0;
  char* report = nullptr;
  CHECK(mgpn_grad_check(cfg, 1e-5, 3, 1e-4, &err, &report) == MGPN_OK);
  CHECK(err <= 1e-4);
  CHECK(!take(report).empty());
  CHECK(mgpn_grad_check(cfg, 1e-5, 3, 0.0, &err, &report) == MGPN_ERR_VERIFY);
  mgpn_string_free(report);
  mgpn_config_free(cfg);
}
