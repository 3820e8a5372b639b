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

#include "mgpn/mgpn.h"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <string>

#include "mgpn/checkpoint.hpp"
#include "mgpn/config.hpp"
#include "mgpn/data_io.hpp"
#include "mgpn/errors.hpp"
#include "mgpn/evaluation.hpp"
#include "mgpn/model.hpp"
#include "mgpn/training.hpp"

struct mgpn_config {
  mgpn::RunConfig cfg;
};

struct mgpn_dataset {
  mgpn::Dataset data;
};

struct mgpn_model {
  mgpn::RunConfig cfg;
  mgpn::TrainState state;
};

namespace {

thread_local std::string g_last_error;

template <typename Fn>
mgpn_status guarded(Fn&& fn) {
  try {
    g_last_error.clear();
    fn();
    return MGPN_OK;
  } catch (const mgpn::ConfigError& e) {
    g_last_error = e.what();
    return MGPN_ERR_USAGE;
  } catch (const mgpn::NumericError& e) {
    g_last_error = e.what();
    return MGPN_ERR_VERIFY;
  } catch (const std::invalid_argument& e) {
    g_last_error = e.what();
    return MGPN_ERR_USAGE;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return MGPN_ERR_DATA;
  }
}

char* dup_string(const std::string& s) {
  auto* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void require(const void* p, const char* what) {
  if (!p) throw std::invalid_argument(std::string("null argument: ") + what);
}

void set_out(char** out, const std::string& s) {
  if (out) *out = dup_string(s);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  f << text;
  if (!f) throw mgpn::FormatError("cannot write " + path.string());
}

std::string render_predictions(const std::vector<mgpn::Prediction>& preds) {
  std::string out;
  char buf[128];
  int rank = 0;
  for (const auto& p : preds) {
    std::snprintf(buf, sizeof buf, "%d %.6f %.6f %.6f\n", ++rank, p.score, p.span.start_s,
                  p.span.end_s);
    out += buf;
  }
  return out;
}

}  // namespace

extern "C" {

const char* mgpn_last_error(void) { return g_last_error.c_str(); }

void mgpn_string_free(char* s) { std::free(s); }

mgpn_status mgpn_config_new(mgpn_config** out) {
  return guarded([&] {
    require(out, "out");
    *out = new mgpn_config{};
  });
}

mgpn_status mgpn_config_load(const char* path, int require_all, mgpn_config** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new mgpn_config{mgpn::load_config(path, require_all != 0)};
  });
}

mgpn_status mgpn_config_set(mgpn_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    require(cfg, "cfg");
    require(key, "key");
    require(value, "value");
    cfg->cfg.set(key, value);
  });
}

mgpn_status mgpn_config_get(const mgpn_config* cfg, const char* key, char** out) {
  return guarded([&] {
    require(cfg, "cfg");
    require(key, "key");
    set_out(out, cfg->cfg.get(key));
  });
}

mgpn_status mgpn_config_to_string(const mgpn_config* cfg, char** out) {
  return guarded([&] {
    require(cfg, "cfg");
    set_out(out, cfg->cfg.to_text());
  });
}

void mgpn_config_free(mgpn_config* cfg) { delete cfg; }

void mgpn_synth_spec_default(mgpn_synth_spec* spec) {
  if (!spec) return;
  const mgpn::SyntheticSpec d;
  spec->num_samples = d.num_samples;
  spec->num_train = d.num_samples;
  spec->clips = d.T_V;
  spec->feature_dim = d.D_v;
  spec->vocab_size = d.vocab_size;
  spec->query_len_min = d.query_len_min;
  spec->query_len_max = d.query_len_max;
  spec->span_frac_min = d.span_frac_min;
  spec->span_frac_max = d.span_frac_max;
  spec->noise_std = d.noise_std;
  spec->seed = d.seed;
  spec->word_dim = d.word_dim;
}

mgpn_status mgpn_synth_data(const mgpn_synth_spec* spec, const char* out_dir) {
  return guarded([&] {
    require(spec, "spec");
    require(out_dir, "out_dir");
    mgpn::SyntheticSpec s;
    s.num_samples = spec->num_samples;
    s.T_V = spec->clips;
    s.D_v = spec->feature_dim;
    s.vocab_size = spec->vocab_size;
    s.query_len_min = spec->query_len_min;
    s.query_len_max = spec->query_len_max;
    s.span_frac_min = spec->span_frac_min;
    s.span_frac_max = spec->span_frac_max;
    s.noise_std = spec->noise_std;
    s.seed = spec->seed;
    s.word_dim = spec->word_dim;
    try {
      s.validate();
    } catch (const mgpn::ValidationError& e) {
      throw std::invalid_argument(e.what());
    }
    if (spec->num_train < 0 || spec->num_train > spec->num_samples)
      throw std::invalid_argument("train count must lie in [0, samples]");
    mgpn::write_synthetic(out_dir, mgpn::gen_synthetic(s), spec->num_train);
  });
}

mgpn_status mgpn_dataset_open(const char* dir, const char* split, const mgpn_config* cfg,
                              mgpn_dataset** out) {
  return guarded([&] {
    require(dir, "dir");
    require(split, "split");
    require(out, "out");
    const mgpn::RunConfig def;
    const auto& c = cfg ? cfg->cfg : def;
    *out = new mgpn_dataset{mgpn::Dataset::open(dir, split, c.model.word_dim, c.model.L_max)};
  });
}

int mgpn_dataset_size(const mgpn_dataset* ds) { return ds ? ds->data.size() : 0; }

int mgpn_dataset_feature_dim(const mgpn_dataset* ds) { return ds ? ds->data.feature_dim() : 0; }

void mgpn_dataset_free(mgpn_dataset* ds) { delete ds; }

mgpn_status mgpn_train(const mgpn_config* cfg, const mgpn_dataset* train, mgpn_log_fn log,
                       void* user) {
  return guarded([&] {
    require(cfg, "cfg");
    require(train, "train");
    mgpn::RunConfig c = cfg->cfg;
    const auto& data = train->data;
    if (c.model.feature_dim == 0) c.model.feature_dim = data.feature_dim();
    if (c.model.feature_dim != data.feature_dim())
      throw mgpn::ValidationError("model.feature_dim " + std::to_string(c.model.feature_dim) +
                                  " does not match the dataset's " +
                                  std::to_string(data.feature_dim()));
    if (c.model.word_dim != data.word_dim())
      throw mgpn::ValidationError("model.word_dim does not match the word vectors");
    c.validate();

    const std::filesystem::path dir = c.train.checkpoint_dir;
    std::filesystem::create_directories(dir);
    mgpn::TrainState state;
    state.model = mgpn::init_model(c.model, c.train.seed);
    state.adam = mgpn::Adam(state.model.params);
    mgpn::save_checkpoint(dir / "init.mgpc", c, state);

    std::string log_text;
    mgpn::train(state, data, c, [&](int epoch, double loss) {
      const auto line = mgpn::epoch_line(epoch, loss);
      log_text += line + "\n";
      if (log) log(line.c_str(), user);
    });
    write_text(dir / "train.log", log_text);
    mgpn::save_checkpoint(dir / "final.mgpc", c, state);
  });
}

mgpn_status mgpn_model_create(const mgpn_config* cfg, int feature_dim, uint64_t seed,
                              mgpn_model** out) {
  return guarded([&] {
    require(cfg, "cfg");
    require(out, "out");
    auto m = std::make_unique<mgpn_model>();
    m->cfg = cfg->cfg;
    if (feature_dim > 0) m->cfg.model.feature_dim = feature_dim;
    if (m->cfg.model.feature_dim <= 0)
      throw mgpn::ConfigError("model.feature_dim must be set to create a model");
    m->state.model = mgpn::init_model(m->cfg.model, seed);
    m->state.adam = mgpn::Adam(m->state.model.params);
    *out = m.release();
  });
}

mgpn_status mgpn_model_load(const char* path, mgpn_model** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    auto m = std::make_unique<mgpn_model>();
    m->state = mgpn::load_checkpoint(path, &m->cfg);
    *out = m.release();
  });
}

mgpn_status mgpn_model_save(const mgpn_model* model, const char* path) {
  return guarded([&] {
    require(model, "model");
    require(path, "path");
    mgpn::save_checkpoint(path, model->cfg, model->state);
  });
}

void mgpn_model_free(mgpn_model* model) { delete model; }

uint64_t mgpn_model_param_count(const mgpn_model* model) {
  return model ? mgpn::param_count(model->state.model.params) : 0;
}

mgpn_status mgpn_model_param_report(const mgpn_model* model, char** out) {
  return guarded([&] {
    require(model, "model");
    std::string text;
    char buf[160];
    for (const auto& g : mgpn::param_breakdown(model->state.model.params)) {
      std::snprintf(buf, sizeof buf, "%-24s %10zu\n", g.name.c_str(), g.count);
      text += buf;
    }
    std::snprintf(buf, sizeof buf, "%-24s %10zu\n", "total",
                  mgpn::param_count(model->state.model.params));
    text += buf;
    set_out(out, text);
  });
}

mgpn_status mgpn_model_config(const mgpn_model* model, mgpn_config** out) {
  return guarded([&] {
    require(model, "model");
    require(out, "out");
    auto c = model->cfg;
    c.model = model->state.model.config;
    *out = new mgpn_config{c};
  });
}

mgpn_status mgpn_evaluate(const mgpn_model* model, const mgpn_dataset* ds,
                          const mgpn_config* eval_cfg, char** table, char** dump) {
  return guarded([&] {
    require(model, "model");
    require(ds, "ds");
    if (ds->data.feature_dim() != model->state.model.config.feature_dim)
      throw mgpn::ValidationError("dataset feature dimension does not match the model");
    const auto& ec = eval_cfg ? eval_cfg->cfg.eval : model->cfg.eval;
    const auto result = mgpn::evaluate(model->state.model, ds->data, ec);
    set_out(table, result.table.to_text());
    set_out(dump, mgpn::prediction_dump(ds->data, result));
  });
}

mgpn_status mgpn_predict(const mgpn_model* model, const char* dir, const char* video_id,
                         const char* query, double duration, int k, double nms_threshold,
                         char** out) {
  return guarded([&] {
    require(model, "model");
    require(dir, "dir");
    require(video_id, "video_id");
    require(query, "query");
    if (k < 1) throw std::invalid_argument("k must be >= 1");
    if (!(duration > 0)) throw std::invalid_argument("duration must be positive");
    const auto& mc = model->state.model.config;
    const std::filesystem::path root = dir;
    const auto vocab = mgpn::Vocab::load(root / "vocab.txt");
    const auto vectors = mgpn::load_word_vectors(root / "glove.txt", vocab, mc.word_dim);
    const auto feats =
        mgpn::load_features(root / "features" / (std::string(video_id) + ".mgpf"));
    if (feats.dim() != mc.feature_dim)
      throw mgpn::ValidationError("feature dimension does not match the model");
    const auto tokens = mgpn::tokenize(query, vocab, mc.L_max);
    mgpn::SampleInput in;
    in.clip_feats = &feats.feats;
    in.tokens = mgpn::embed(tokens, vectors);
    in.mask = tokens.mask;
    in.duration = duration;
    const auto grid = mgpn::batch_grid(mc, duration);
    const auto preds = mgpn::topk_predictions(mgpn::predict_scores(model->state.model, in, grid),
                                              grid, k, nms_threshold);
    set_out(out, render_predictions(preds));
  });
}

mgpn_status mgpn_predict_sample(const mgpn_model* model, const mgpn_dataset* ds, int index,
                                int k, double nms_threshold, char** out) {
  return guarded([&] {
    require(model, "model");
    require(ds, "ds");
    if (index < 0 || index >= ds->data.size())
      throw std::invalid_argument("sample index out of range");
    if (k < 1) throw std::invalid_argument("k must be >= 1");
    const auto& mc = model->state.model.config;
    if (ds->data.feature_dim() != mc.feature_dim)
      throw mgpn::ValidationError("dataset feature dimension does not match the model");
    const auto& s = ds->data.samples()[static_cast<std::size_t>(index)];
    const auto inputs = mgpn::make_inputs(ds->data, {index});
    const auto grid = mgpn::batch_grid(mc, s.duration);
    const auto preds = mgpn::topk_predictions(
        mgpn::predict_scores(model->state.model, inputs.front(), grid), grid, k, nms_threshold);
    const auto& a = ds->data.annotations()[static_cast<std::size_t>(index)];
    char buf[128];
    std::snprintf(buf, sizeof buf, " gt %.6f %.6f\n", s.gt_span.start_s, s.gt_span.end_s);
    set_out(out, "# " + s.video_id + " \"" + a.query + "\"" + buf + render_predictions(preds));
  });
}

mgpn_status mgpn_render_grid(int T, const char* scheme, char** out) {
  return guarded([&] {
    require(scheme, "scheme");
    if (T < 1) throw std::invalid_argument("T must be >= 1");
    mgpn::GridScheme s;
    try {
      s = mgpn::parse_scheme(scheme);
    } catch (const std::exception& e) {
      throw std::invalid_argument(e.what());
    }
    const auto grid = mgpn::build_grid(T, static_cast<double>(T), s);
    std::string text;
    for (int i = 0; i < T; ++i) {
      for (int j = 0; j < T; ++j) text += grid.is_valid(i, j) ? '#' : '.';
      text += '\n';
    }
    text += "N_A = " + std::to_string(grid.count()) + "\n";
    set_out(out, text);
  });
}

mgpn_status mgpn_grad_check(const mgpn_config* cfg, double epsilon, uint64_t seed,
                            double tolerance, double* max_error, char** report) {
  mgpn_status verdict = MGPN_OK;
  const auto status = guarded([&] {
    require(cfg, "cfg");
    if (!(epsilon > 0)) throw std::invalid_argument("epsilon must be positive");
    const auto& mc = cfg->cfg.model;
    mgpn::GradCheckSetup setup;
    setup.T = mc.T;
    setup.C = mc.C;
    setup.groups = mc.groups;
    setup.L = mc.L_max;
    setup.word_dim = mc.word_dim;
    if (mc.feature_dim > 0) setup.feature_dim = mc.feature_dim;
    setup.epsilon = epsilon;
    setup.seed = seed;
    const auto r = mgpn::grad_check_random(mc, setup);
    if (max_error) *max_error = r.max_rel_error;
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  "checked %zu parameters (%zu with a refined step)\nmax relative error %.3e\n"
                  "worst %s[%zu] analytic %.9e numeric %.9e\n",
                  r.checked, r.refined, r.max_rel_error, r.worst_param.c_str(), r.worst_index,
                  r.worst_analytic, r.worst_numeric);
    set_out(report, buf);
    if (!(r.max_rel_error <= tolerance)) verdict = MGPN_ERR_VERIFY;
  });
  if (status != MGPN_OK) return status;
  if (verdict != MGPN_OK) g_last_error = "max relative error above tolerance";
  return verdict;
}

}  // extern "C"
