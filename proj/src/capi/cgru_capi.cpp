// Copyright 2026 The CGRU Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdlib>
#include <cstring>
#include <string>

#include <fmt/format.h>

#include "cgru/cgru.h"
#include "common/errors.hpp"
#include "numerics/checkpoint.hpp"
#include "pipeline/pipeline.hpp"

struct cgru_config {
  cgru::pipeline::RunConfig value;
};

struct cgru_network {
  cgru::numerics::Network value;
};

namespace {

thread_local std::string g_last_error;

cgru_status status_of(cgru::ErrorKind kind) {
  switch (kind) {
    case cgru::ErrorKind::usage: return CGRU_ERR_USAGE;
    case cgru::ErrorKind::config: return CGRU_ERR_CONFIG;
    case cgru::ErrorKind::io: return CGRU_ERR_IO;
    case cgru::ErrorKind::format: return CGRU_ERR_FORMAT;
    case cgru::ErrorKind::shape: return CGRU_ERR_SHAPE;
    case cgru::ErrorKind::numeric: return CGRU_ERR_NUMERIC;
    case cgru::ErrorKind::phase: return CGRU_ERR_PHASE;
  }
  return CGRU_ERR_INTERNAL;
}

template <typename F>
cgru_status guarded(F&& body) {
  try {
    body();
    g_last_error.clear();
    return CGRU_OK;
  } catch (const cgru::Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return CGRU_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return CGRU_ERR_INTERNAL;
  }
}

void require(const void* p, const char* what) {
  if (!p) throw cgru::UsageError(std::string(what) + " must not be NULL");
}

template <typename F>
cgru_status with_workspace(const cgru_config_t* cfg, const char* out_dir, F&& body) {
  return guarded([&] {
    require(cfg, "cfg");
    require(out_dir, "out_dir");
    cgru::pipeline::Workspace ws(cfg->value, out_dir);
    body(ws);
  });
}

}  // namespace

extern "C" {

const char* cgru_last_error_message(void) { return g_last_error.c_str(); }

const char* cgru_version(void) { return "0.1.0"; }

cgru_status cgru_config_create(cgru_config_t** out) {
  return guarded([&] {
    require(out, "out");
    *out = new cgru_config{};
  });
}

void cgru_config_destroy(cgru_config_t* cfg) { delete cfg; }

cgru_status cgru_config_load_file(cgru_config_t* cfg, const char* path) {
  return guarded([&] {
    require(cfg, "cfg");
    require(path, "path");
    cfg->value = cgru::pipeline::load_config(path);
  });
}

cgru_status cgru_config_set(cgru_config_t* cfg, const char* key, const char* value) {
  return guarded([&] {
    require(cfg, "cfg");
    require(key, "key");
    require(value, "value");
    cgru::pipeline::set_value(cfg->value, key, value);
  });
}

cgru_status cgru_config_override(cgru_config_t* cfg, const char* assignment) {
  return guarded([&] {
    require(cfg, "cfg");
    require(assignment, "assignment");
    cgru::pipeline::apply_override(cfg->value, assignment);
  });
}

cgru_status cgru_config_get(const cgru_config_t* cfg, const char* key, char* buf, size_t buf_size, size_t* needed) {
  return guarded([&] {
    require(cfg, "cfg");
    require(key, "key");
    const std::string v = cgru::pipeline::get_value(cfg->value, key);
    if (needed) *needed = v.size() + 1;
    if (buf == nullptr || buf_size < v.size() + 1)
      throw cgru::UsageError(fmt::format("buffer too small for '{}' ({} bytes needed)", key, v.size() + 1));
    std::memcpy(buf, v.c_str(), v.size() + 1);
  });
}

cgru_status cgru_config_validate(const cgru_config_t* cfg) {
  return guarded([&] {
    require(cfg, "cfg");
    cgru::pipeline::validate(cfg->value);
  });
}

cgru_status cgru_config_hash(const cgru_config_t* cfg, char out[65]) {
  return guarded([&] {
    require(cfg, "cfg");
    require(out, "out");
    const std::string h = cgru::pipeline::config_hash(cfg->value);
    std::memcpy(out, h.c_str(), 65);
  });
}

cgru_status cgru_network_load(const char* path, cgru_network_t** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new cgru_network{cgru::numerics::load_network(path)};
  });
}

cgru_status cgru_network_save(const cgru_network_t* net, const char* path) {
  return guarded([&] {
    require(net, "net");
    require(path, "path");
    cgru::numerics::save_network(net->value, path);
  });
}

void cgru_network_destroy(cgru_network_t* net) { delete net; }

size_t cgru_network_param_count(const cgru_network_t* net) { return net ? net->value.param_count() : 0; }
size_t cgru_network_input_dim(const cgru_network_t* net) { return net ? net->value.input_dim() : 0; }
size_t cgru_network_output_dim(const cgru_network_t* net) { return net ? net->value.output_dim() : 0; }
size_t cgru_network_cond_dim(const cgru_network_t* net) { return net ? net->value.cond_dim() : 0; }

cgru_status cgru_network_forward(const cgru_network_t* net, const double* input, size_t rows, const double* cond,
                                 double* output) {
  return guarded([&] {
    require(net, "net");
    require(input, "input");
    require(output, "output");
    using cgru::numerics::Tensor;
    const auto& n = net->value;
    if ((cond != nullptr) != n.has_film())
      throw cgru::UsageError(n.has_film() ? "this network needs a conditioning input"
                                          : "this network takes no conditioning input");
    Tensor in({rows, n.input_dim()}, std::vector<double>(input, input + rows * n.input_dim()));
    Tensor c;
    if (cond) c = Tensor({rows, n.cond_dim()}, std::vector<double>(cond, cond + rows * n.cond_dim()));
    const Tensor out = cgru::numerics::forward(n, in, cond ? &c : nullptr);
    std::memcpy(output, out.data(), out.size() * sizeof(double));
  });
}

cgru_status cgru_run_classifier(const cgru_config_t* cfg, const char* out_dir) {
  return with_workspace(cfg, out_dir, [](auto& ws) { cgru::pipeline::run_classifier(ws); });
}

cgru_status cgru_run_pretrain(const cgru_config_t* cfg, const char* out_dir) {
  return with_workspace(cfg, out_dir, [](auto& ws) { cgru::pipeline::run_pretrain(ws); });
}

cgru_status cgru_run_critic(const cgru_config_t* cfg, const char* out_dir) {
  return with_workspace(cfg, out_dir, [](auto& ws) { cgru::pipeline::run_critic(ws); });
}

cgru_status cgru_run_unlearn(const cgru_config_t* cfg, const char* out_dir, const char* method, const char* base_ckpt,
                             const char* critic_ckpt, const char* classifier_ckpt) {
  return with_workspace(cfg, out_dir, [&](auto& ws) {
    require(method, "method");
    cgru::pipeline::UnlearnInputs in;
    if (base_ckpt) in.base = base_ckpt;
    if (critic_ckpt) in.critic = critic_ckpt;
    if (classifier_ckpt) in.classifier = classifier_ckpt;
    cgru::pipeline::run_unlearn(ws, cgru::pipeline::parse_method(method), in);
  });
}

cgru_status cgru_run_eval(const cgru_config_t* cfg, const char* out_dir, const char* label) {
  return with_workspace(cfg, out_dir, [&](auto& ws) {
    require(label, "label");
    cgru::pipeline::run_eval(ws, label);
  });
}

cgru_status cgru_run_full(const cgru_config_t* cfg, const char* out_dir) {
  return with_workspace(cfg, out_dir, [](auto& ws) { cgru::pipeline::run_full(ws); });
}

cgru_status cgru_diag(const cgru_config_t* cfg, const char* out_dir, const char* which) {
  return with_workspace(cfg, out_dir, [&](auto& ws) {
    require(which, "which");
    const std::string w = which;
    if (w == "variance") cgru::pipeline::diag_variance(ws);
    else if (w == "unbiasedness") cgru::pipeline::diag_unbiasedness(ws);
    else if (w == "ablation") cgru::pipeline::diag_ablation(ws);
    else if (w == "baseline-optimum") cgru::pipeline::diag_baseline_optimum(ws);
    else if (w == "fidelity") cgru::pipeline::diag_fidelity(ws);
    else throw cgru::UsageError("unknown diagnostic '" + w + "'");
  });
}

cgru_status cgru_report(const char* run_dir, char** text) {
  return guarded([&] {
    require(run_dir, "run_dir");
    const std::string s = cgru::pipeline::emit_report(run_dir);
    if (text) {
      *text = static_cast<char*>(std::malloc(s.size() + 1));
      if (!*text) throw std::bad_alloc();
      std::memcpy(*text, s.c_str(), s.size() + 1);
    }
  });
}

void cgru_string_free(char* s) { std::free(s); }

}  // extern "C"
