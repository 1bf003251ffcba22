// Command-line front end; talks to the library only through the C API.
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cornerspace/cornerspace.h"

namespace {

int report_error(cs_status s) {
  std::fprintf(stderr, "cornerspace: %s: %s\n", cs_status_name(s), cs_last_error());
  return 1;
}

void print_rows(const cs_result* r, bool quiet) {
  if (quiet) return;
  std::printf("%-6s %6s %-9s %12s %12s %12s %12s\n", "L", "M", "solver", "n", "Re<b>", "g2",
              "g2_nn");
  for (size_t k = 0; k < cs_result_row_count(r); ++k) {
    cs_row row;
    if (cs_result_row(r, k, &row) != CS_OK) continue;
    const std::string shape = std::to_string(row.lx) + "x" + std::to_string(row.ly);
    char g2[32] = "-", g2nn[32] = "-";
    if (row.has_g2) std::snprintf(g2, sizeof g2, "%.6g", row.g2);
    if (row.has_g2_nn) std::snprintf(g2nn, sizeof g2nn, "%.6g", row.g2_nn);
    std::printf("%-6s %6lld %-9s %12.6g %12.6g %12s %12s\n", shape.c_str(), row.m, row.solver,
                row.n, row.re_b, g2, g2nn);
  }
  for (size_t k = 0; k < cs_result_warning_count(r); ++k)
    std::fprintf(stderr, "warning: %s\n", cs_result_warning(r, k));
}

// 0 converged, 2 limits reached, 1 error
int run_one(cs_config* c, bool quiet) {
  cs_result* r = nullptr;
  const cs_status s = cs_run(c, 1, &r);
  if (s != CS_OK) return report_error(s);
  if (!quiet) std::printf("run %s (%s)\n", cs_result_run_id(r), cs_config_name(c));
  print_rows(r, quiet);
  const int code = cs_result_exit_code(r);
  if (code == 2) std::fprintf(stderr, "cornerspace: limits reached without convergence\n");
  cs_result_free(r);
  return code;
}

int worst(int a, int b) {
  auto rank = [](int c) { return c == 1 ? 2 : (c == 2 ? 1 : 0); };
  return rank(a) >= rank(b) ? a : b;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Corner-space renormalization for driven-dissipative Bose-Hubbard lattices"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(cs_version()));

  std::string config_path, out_dir, checkpoint_dir, preset_name;
  unsigned long long seed = 0;
  int m_max = 0;
  bool quiet = false;

  auto* run = app.add_subcommand("run", "Run an experiment described by a JSON config file");
  run->add_option("config", config_path, "Config file")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "Output directory (overrides outputs.dir)");
  auto* run_seed = run->add_option("--seed", seed, "Trajectory master seed");
  run->add_option("--checkpoint", checkpoint_dir, "Checkpoint directory for resumable runs");
  run->add_flag("-q,--quiet", quiet, "Print nothing on success");

  auto* preset = app.add_subcommand("preset", "Run a built-in preset reproducing a table or figure");
  preset->add_option("name", preset_name, "Preset name (see 'presets')")->required();
  preset->add_option("--out", out_dir, "Base output directory; each preset row gets a subdirectory");
  auto* preset_seed = preset->add_option("--seed", seed, "Trajectory master seed");
  preset->add_option("--m-max", m_max, "Drop corner dimensions above this value")
      ->check(CLI::PositiveNumber);
  preset->add_flag("-q,--quiet", quiet, "Print nothing on success");

  auto* presets = app.add_subcommand("presets", "List the built-in presets");

  auto* validate = app.add_subcommand("validate", "Check a config file and print it resolved");
  validate->add_option("config", config_path, "Config file")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (*presets) {
    for (size_t k = 0; k < cs_preset_count(); ++k) {
      const char *name, *desc, *where;
      if (cs_preset_info(k, &name, &desc, &where) == CS_OK)
        std::printf("%-8s %-10s %s\n", name, where, desc);
    }
    return 0;
  }

  if (*validate) {
    cs_config* c = nullptr;
    const cs_status s = cs_config_from_file(config_path.c_str(), &c);
    if (s != CS_OK) return report_error(s);
    size_t needed = 0;
    cs_config_to_json(c, nullptr, 0, &needed);
    std::string text(needed, '\0');
    cs_config_to_json(c, text.data(), text.size(), &needed);
    std::printf("%s\n", text.c_str());
    cs_config_free(c);
    return 0;
  }

  if (*run) {
    cs_config* c = nullptr;
    cs_status s = cs_config_from_file(config_path.c_str(), &c);
    if (s != CS_OK) return report_error(s);
    if (!out_dir.empty() && (s = cs_config_set_output_dir(c, out_dir.c_str())) != CS_OK) {
      cs_config_free(c);
      return report_error(s);
    }
    if (*run_seed) cs_config_set_seed(c, seed);
    if (!checkpoint_dir.empty()) cs_config_set_checkpoint_dir(c, checkpoint_dir.c_str());
    const int code = run_one(c, quiet);
    cs_config_free(c);
    return code;
  }

  cs_config** rows = nullptr;
  size_t count = 0;
  const cs_status s = cs_preset_load(preset_name.c_str(), *preset_seed ? 1 : 0, seed, m_max,
                                     &rows, &count);
  if (s != CS_OK) return report_error(s);
  const std::string base = out_dir.empty() ? std::string("out") : out_dir;
  int code = 0;
  for (size_t k = 0; k < count; ++k) {
    const std::string dir = base + "/" + cs_config_name(rows[k]);
    cs_config_set_output_dir(rows[k], dir.c_str());
    code = worst(code, run_one(rows[k], quiet));
  }
  cs_config_array_free(rows, count);
  return code;
}
