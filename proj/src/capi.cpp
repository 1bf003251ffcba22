#include <cstring>
#include <new>

#include "cornerspace/cornerspace.h"
#include "cornerspace/experiment.hpp"

using namespace cornerspace;

struct cs_config {
  ExperimentConfig config;
};

struct cs_result {
  ExperimentResult result;
  std::vector<std::string> solver_names;
  std::string csv[3];
};

namespace {

thread_local std::string last_error;

cs_status map_code(ErrorCode c) {
  switch (c) {
    case ErrorCode::invalid_argument: return CS_ERR_INVALID_ARGUMENT;
    case ErrorCode::config: return CS_ERR_CONFIG;
    case ErrorCode::numerical: return CS_ERR_NUMERICAL;
    case ErrorCode::io: return CS_ERR_IO;
    case ErrorCode::resource: return CS_ERR_RESOURCE;
    case ErrorCode::not_converged: return CS_ERR_NOT_CONVERGED;
    case ErrorCode::internal: return CS_ERR_INTERNAL;
  }
  return CS_ERR_INTERNAL;
}

template <class Fn>
cs_status guarded(Fn&& fn) {
  try {
    fn();
    last_error.clear();
    return CS_OK;
  } catch (const Error& e) {
    last_error = e.what();
    return map_code(e.code());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return CS_ERR_RESOURCE;
  } catch (const std::exception& e) {
    last_error = e.what();
    return CS_ERR_INTERNAL;
  } catch (...) {
    last_error = "unknown failure";
    return CS_ERR_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  if (!p) fail(ErrorCode::invalid_argument, std::string(what) + " must not be NULL");
}

}  // namespace

extern "C" {

const char* cs_version(void) { return kCodeVersion; }
const char* cs_last_error(void) { return last_error.c_str(); }

const char* cs_status_name(cs_status s) {
  switch (s) {
    case CS_OK: return "ok";
    case CS_ERR_INVALID_ARGUMENT: return "invalid argument";
    case CS_ERR_CONFIG: return "configuration error";
    case CS_ERR_NUMERICAL: return "numerical failure";
    case CS_ERR_IO: return "i/o error";
    case CS_ERR_RESOURCE: return "resource limit";
    case CS_ERR_NOT_CONVERGED: return "not converged";
    case CS_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

cs_status cs_config_from_file(const char* path, cs_config** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new cs_config{load_config(path)};
  });
}

cs_status cs_config_from_json(const char* json, cs_config** out) {
  return guarded([&] {
    need(json, "json");
    need(out, "out");
    *out = new cs_config{config_from_json(json)};
  });
}

cs_status cs_config_to_json(const cs_config* c, char* buf, size_t cap, size_t* needed) {
  return guarded([&] {
    need(c, "config");
    const std::string s = config_to_json(c->config);
    if (needed) *needed = s.size() + 1;
    if (buf && cap > 0) {
      const size_t n = std::min(cap - 1, s.size());
      std::memcpy(buf, s.data(), n);
      buf[n] = '\0';
    }
  });
}

const char* cs_config_name(const cs_config* c) { return c ? c->config.name.c_str() : ""; }

cs_status cs_config_set_output_dir(cs_config* c, const char* dir) {
  return guarded([&] {
    need(c, "config");
    need(dir, "dir");
    require(*dir != '\0', "output directory must not be empty");
    c->config.outputs.dir = dir;
  });
}

cs_status cs_config_set_seed(cs_config* c, uint64_t seed) {
  return guarded([&] {
    need(c, "config");
    c->config.solver.trajectories.master_seed = seed;
  });
}

cs_status cs_config_set_checkpoint_dir(cs_config* c, const char* dir) {
  return guarded([&] {
    need(c, "config");
    c->config.outputs.checkpoint_dir = dir ? dir : "";
  });
}

void cs_config_free(cs_config* c) { delete c; }

size_t cs_preset_count(void) { return list_presets().size(); }

cs_status cs_preset_info(size_t index, const char** name, const char** description,
                         const char** reproduces) {
  static const std::vector<PresetInfo> presets = list_presets();
  return guarded([&] {
    require(index < presets.size(), "preset index out of range");
    if (name) *name = presets[index].name.c_str();
    if (description) *description = presets[index].description.c_str();
    if (reproduces) *reproduces = presets[index].reproduces.c_str();
  });
}

cs_status cs_preset_load(const char* name, int has_seed, uint64_t seed, int m_max,
                         cs_config*** rows, size_t* count) {
  return guarded([&] {
    need(name, "name");
    need(rows, "rows");
    need(count, "count");
    auto configs = preset_configs(name, has_seed ? std::optional<std::uint64_t>(seed) : std::nullopt,
                                  m_max > 0 ? std::optional<int>(m_max) : std::nullopt);
    auto arr = new cs_config*[configs.size()]();
    for (size_t k = 0; k < configs.size(); ++k) arr[k] = new cs_config{std::move(configs[k])};
    *rows = arr;
    *count = configs.size();
  });
}

void cs_config_array_free(cs_config** rows, size_t count) {
  if (!rows) return;
  for (size_t k = 0; k < count; ++k) delete rows[k];
  delete[] rows;
}

cs_status cs_run(const cs_config* c, int write, cs_result** out) {
  return guarded([&] {
    need(c, "config");
    need(out, "out");
    auto r = std::make_unique<cs_result>();
    r->result = execute_experiment(c->config);
    if (write) write_outputs(c->config, r->result);
    for (const auto& row : r->result.rows) r->solver_names.push_back(row.solver);
    r->csv[0] = results_csv(r->result);
    r->csv[1] = spectrum_csv(r->result);
    r->csv[2] = timeseries_csv(r->result);
    *out = r.release();
  });
}

int cs_result_exit_code(const cs_result* r) { return r ? r->result.exit_code : 1; }
const char* cs_result_run_id(const cs_result* r) { return r ? r->result.run_id.c_str() : ""; }
const char* cs_result_manifest(const cs_result* r) {
  return r ? r->result.manifest_json.c_str() : "";
}

size_t cs_result_row_count(const cs_result* r) { return r ? r->result.rows.size() : 0; }

cs_status cs_result_row(const cs_result* r, size_t index, cs_row* out) {
  return guarded([&] {
    need(r, "result");
    need(out, "out");
    require(index < r->result.rows.size(), "row index out of range");
    const ResultRow& row = r->result.rows[index];
    const ObservableRecord& x = row.record;
    *out = cs_row{};
    out->lx = row.lx;
    out->ly = row.ly;
    out->m = row.m;
    out->solver = r->solver_names[index].c_str();
    out->n = x.n;
    out->re_b = x.re_b;
    out->im_b = x.im_b;
    out->has_g2 = x.g2_onsite.has_value();
    out->g2 = x.g2_onsite.value_or(0.0);
    out->has_g2_nn = x.g2_nn.has_value();
    out->g2_nn = x.g2_nn.value_or(0.0);
    out->has_errors = x.has_errors;
    out->n_err = x.n_err;
    out->re_b_err = x.re_b_err;
    out->im_b_err = x.im_b_err;
    out->g2_err = x.g2_err.value_or(0.0);
    out->g2_nn_err = x.g2_nn_err.value_or(0.0);
  });
}

size_t cs_result_spectrum_size(const cs_result* r) { return r ? r->result.spectrum.size() : 0; }

cs_status cs_result_spectrum(const cs_result* r, size_t index, int* rank, double* p,
                             double* n_total) {
  return guarded([&] {
    need(r, "result");
    require(index < r->result.spectrum.size(), "spectrum index out of range");
    const SpectrumRow& s = r->result.spectrum[index];
    if (rank) *rank = s.rank;
    if (p) *p = s.p;
    if (n_total) *n_total = s.n_total;
  });
}

size_t cs_result_series_size(const cs_result* r) { return r ? r->result.series.size() : 0; }

cs_status cs_result_series(const cs_result* r, size_t index, double* t, double* n, double* g2,
                           int* has_g2) {
  return guarded([&] {
    need(r, "result");
    require(index < r->result.series.size(), "series index out of range");
    const TimePoint& tp = r->result.series[index];
    if (t) *t = tp.t;
    if (n) *n = tp.n;
    if (g2) *g2 = tp.g2.value_or(0.0);
    if (has_g2) *has_g2 = tp.g2.has_value();
  });
}

size_t cs_result_warning_count(const cs_result* r) { return r ? r->result.warnings.size() : 0; }

const char* cs_result_warning(const cs_result* r, size_t index) {
  if (!r || index >= r->result.warnings.size()) return nullptr;
  return r->result.warnings[index].c_str();
}

const char* cs_result_csv(const cs_result* r, cs_table which) {
  if (!r || which < CS_TABLE_RESULTS || which > CS_TABLE_SERIES) return nullptr;
  return r->csv[which].c_str();
}

void cs_result_free(cs_result* r) { delete r; }

void cs_model_defaults(cs_model* m) {
  if (!m) return;
  const ModelParams p;
  *m = cs_model{p.delta_omega, p.u, p.j, p.f, p.gamma, p.hardcore ? 1 : 0, p.n_max};
}

cs_status cs_meanfield(const cs_model* m, cs_meanfield_result* out) {
  return guarded([&] {
    need(m, "model");
    need(out, "out");
    ModelParams p;
    p.delta_omega = m->delta_omega;
    p.u = m->u;
    p.j = m->j;
    p.f = m->f;
    p.gamma = m->gamma;
    p.hardcore = m->hardcore != 0;
    p.n_max = m->n_max;
    p.validate();
    MeanFieldOptions o;
    o.throw_on_failure = false;
    const MeanFieldSolution s = gutzwiller_fixed_point(p, o);
    *out = cs_meanfield_result{s.n,        s.b.real(),   s.b.imag(), s.g2.value_or(0.0),
                               s.g2.has_value(), s.iterations, s.residual, s.converged};
  });
}

cs_status cs_select_top_pairs(const double* pa, size_t na, const double* pb, size_t nb, size_t m,
                              int* ra, int* rb, double* p) {
  return guarded([&] {
    need(pa, "pa");
    need(pb, "pb");
    need(ra, "ra");
    need(rb, "rb");
    need(p, "p");
    const RealVector a = Eigen::Map<const RealVector>(pa, static_cast<Index>(na));
    const RealVector b = Eigen::Map<const RealVector>(pb, static_cast<Index>(nb));
    const PairSelection sel = select_top_m_pairs(a, b, static_cast<Index>(m));
    for (size_t k = 0; k < m; ++k) {
      ra[k] = sel.pairs[k].ra;
      rb[k] = sel.pairs[k].rb;
      p[k] = sel.pairs[k].p;
    }
  });
}

}  // extern "C"
