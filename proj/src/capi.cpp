// Copyright 2026 The labelfill Authors.
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


#include "labelfill/labelfill.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <memory>
#include <new>
#include <string>
#include <variant>

#include "json.hpp"
#include "labelfill/error.hpp"
#include "labelfill/experiment.hpp"
#include "labelfill/io.hpp"

struct lf_context {
  labelfill::ExperimentConfig config;
  lf_log_fn log = nullptr;
  void* log_user = nullptr;

  labelfill::LogSink sink() const {
    if (!log) return {};
    return [fn = log, user = log_user](std::string_view line) { fn(std::string(line).c_str(), user); };
  }
};

struct lf_tensor {
  labelfill::Tensor value;
};

namespace {

thread_local std::string g_error;
thread_local std::string g_kind = "none";

lf_status record(lf_status status, const char* kind, const std::string& what) {
  g_error = what;
  g_kind = kind;
  return status;
}

template <typename F>
lf_status guarded(F&& f) {
  try {
    f();
    g_error.clear();
    g_kind = "none";
    return LF_OK;
  } catch (const labelfill::Error& e) {
    return record(static_cast<lf_status>(labelfill::exit_code(e.kind())), labelfill::to_string(e.kind()), e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return record(LF_ERR_IO, "io", e.what());
  } catch (const std::bad_alloc&) {
    return record(LF_ERR_INTERNAL, "internal", "out of memory");
  } catch (const std::exception& e) {
    return record(LF_ERR_INTERNAL, "internal", e.what());
  }
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void give(char** out, const std::string& s) {
  if (out) *out = dup(s);
}

void need(const void* p, const char* what) {
  labelfill::require(p != nullptr, labelfill::ErrorKind::Usage, std::string(what) + " is NULL");
}

labelfill::Variant variant_of(const char* name, int flags) {
  need(name, "variant");
  labelfill::Variant v = labelfill::Variant::parse(name);
  if (flags & LF_VARIANT_NO_TV_DISTILL) v.distill_mask = false;
  if (flags & LF_VARIANT_NO_CE) v.ce = false;
  v.validate();
  return v;
}

}  // namespace

extern "C" {

const char* lf_version(void) { return "0.1.0"; }
const char* lf_last_error(void) { return g_error.c_str(); }
const char* lf_last_error_kind(void) { return g_kind.c_str(); }
void lf_free_string(char* s) { std::free(s); }

lf_status lf_context_new(lf_context** out) {
  return guarded([&] {
    need(out, "out");
    *out = new lf_context();
  });
}

lf_status lf_context_from_json(const char* json, lf_context** out) {
  return guarded([&] {
    need(json, "json");
    need(out, "out");
    auto ctx = std::make_unique<lf_context>();
    ctx->config = labelfill::ExperimentConfig::from_json(json);
    ctx->config.validate();
    *out = ctx.release();
  });
}

lf_status lf_context_from_file(const char* path, lf_context** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    auto ctx = std::make_unique<lf_context>();
    ctx->config = labelfill::ExperimentConfig::load(path);
    ctx->config.validate();
    *out = ctx.release();
  });
}

void lf_context_free(lf_context* ctx) { delete ctx; }

lf_status lf_context_set_seed(lf_context* ctx, uint64_t seed) {
  return guarded([&] {
    need(ctx, "context");
    ctx->config.seed = seed;
  });
}

lf_status lf_context_set_output(lf_context* ctx, const char* dir) {
  return guarded([&] {
    need(ctx, "context");
    need(dir, "dir");
    labelfill::require(*dir != '\0', labelfill::ErrorKind::Usage, "output directory is empty");
    ctx->config.output = dir;
  });
}

lf_status lf_context_set_threads(lf_context* ctx, int threads) {
  return guarded([&] {
    need(ctx, "context");
    labelfill::require(threads >= 1, labelfill::ErrorKind::Usage, "threads must be at least 1");
    ctx->config.threads = static_cast<std::size_t>(threads);
  });
}

lf_status lf_context_patch(lf_context* ctx, const char* json_patch) {
  return guarded([&] {
    need(ctx, "context");
    need(json_patch, "patch");
    nlohmann::json base = nlohmann::json::parse(ctx->config.to_json());
    nlohmann::json patch;
    try {
      patch = nlohmann::json::parse(json_patch);
    } catch (const nlohmann::json::exception& e) {
      labelfill::fail(labelfill::ErrorKind::Parse, std::string("patch is not valid JSON: ") + e.what());
    }
    base.merge_patch(patch);
    auto next = labelfill::ExperimentConfig::from_json(base.dump());
    next.validate();
    ctx->config = std::move(next);
  });
}

lf_status lf_context_config(const lf_context* ctx, char** json_out) {
  return guarded([&] {
    need(ctx, "context");
    need(json_out, "out");
    *json_out = dup(ctx->config.to_json());
  });
}

void lf_context_set_logger(lf_context* ctx, lf_log_fn fn, void* user) {
  if (!ctx) return;
  ctx->log = fn;
  ctx->log_user = user;
}

lf_status lf_ingest(lf_context* ctx, char** summary) {
  return guarded([&] {
    need(ctx, "context");
    give(summary, labelfill::cmd_ingest(ctx->config, ctx->sink()));
  });
}

lf_status lf_simulate(lf_context* ctx, char** summary) {
  return guarded([&] {
    need(ctx, "context");
    give(summary, labelfill::cmd_simulate(ctx->config, ctx->sink()));
  });
}

lf_status lf_fuse(lf_context* ctx, const char* method, char** summary) {
  return guarded([&] {
    need(ctx, "context");
    need(method, "method");
    give(summary, labelfill::cmd_fuse(ctx->config, labelfill::parse_fusion_method(method), ctx->sink()));
  });
}

lf_status lf_train(lf_context* ctx, const char* variant, int flags, char** summary) {
  return guarded([&] {
    need(ctx, "context");
    give(summary, labelfill::cmd_train(ctx->config, variant_of(variant, flags), ctx->sink()));
  });
}

lf_status lf_eval(lf_context* ctx, const char* variant, int flags, const char* checkpoint, char** summary) {
  return guarded([&] {
    need(ctx, "context");
    const std::filesystem::path ck = checkpoint ? checkpoint : "";
    give(summary, labelfill::cmd_eval(ctx->config, variant_of(variant, flags), ck, ctx->sink()));
  });
}

lf_status lf_sweep(lf_context* ctx, char** summary) {
  return guarded([&] {
    need(ctx, "context");
    give(summary, labelfill::cmd_sweep(ctx->config, ctx->sink()));
  });
}

lf_status lf_bound(lf_context* ctx, char** summary) {
  return guarded([&] {
    need(ctx, "context");
    give(summary, labelfill::cmd_bound(ctx->config, ctx->sink()));
  });
}

lf_status lf_report(lf_context* ctx, char** summary) {
  return guarded([&] {
    need(ctx, "context");
    give(summary, labelfill::cmd_report(ctx->config, ctx->sink()));
  });
}

lf_status lf_pgt_lower_bound(size_t raters, size_t dissent, double p_min, double p_max, double* out) {
  return guarded([&] {
    need(out, "out");
    *out = labelfill::pgt_lower_bound(labelfill::BoundParams::uniform(raters, dissent, p_min, p_max));
  });
}

lf_status lf_pgt_exact(size_t raters, size_t dissent, double p_min, double p_max, double* out) {
  return guarded([&] {
    need(out, "out");
    *out = labelfill::pgt_exact(labelfill::BoundParams::uniform(raters, dissent, p_min, p_max));
  });
}

lf_status lf_tensor_load(const char* path, lf_tensor** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    const auto any = labelfill::decode_container(labelfill::read_file(path));
    auto t = std::make_unique<lf_tensor>();
    if (const auto* f = std::get_if<labelfill::Tensor>(&any)) {
      t->value = *f;
    } else {
      const auto& b = std::get<labelfill::ByteTensor>(any);
      labelfill::Tensor wide(b.shape());
      for (std::size_t i = 0; i < b.size(); ++i) wide[i] = b.data()[i];
      t->value = std::move(wide);
    }
    *out = t.release();
  });
}

void lf_tensor_free(lf_tensor* t) { delete t; }
size_t lf_tensor_ndim(const lf_tensor* t) { return t ? t->value.ndim() : 0; }
size_t lf_tensor_dim(const lf_tensor* t, size_t axis) {
  return t && axis < t->value.ndim() ? t->value.dim(axis) : 0;
}
size_t lf_tensor_size(const lf_tensor* t) { return t ? t->value.size() : 0; }

lf_status lf_tensor_copy(const lf_tensor* t, double* out, size_t capacity) {
  return guarded([&] {
    need(t, "tensor");
    need(out, "out");
    labelfill::require(capacity >= t->value.size(), labelfill::ErrorKind::Usage,
                       "buffer holds " + std::to_string(capacity) + " values, tensor has " +
                           std::to_string(t->value.size()));
    std::memcpy(out, t->value.data().data(), t->value.size() * sizeof(double));
  });
}

}  // extern "C"
