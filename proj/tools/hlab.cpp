// Command-line front end: hlab <command> --config run.json [--grid N]
// [--out PATH] [--seed S] [--threads K] [--quiet]

#include <hlab/cli.hpp>

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace {

struct Flags {
  std::string config;
  int grid = 0;
  std::string out;
  long long seed = -1;
  unsigned threads = 0;
  bool quiet = false;
};

void add_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "Run configuration (JSON)")->required();
  cmd->add_option("--grid", f.grid, "Override the grid resolution");
  cmd->add_option("--out", f.out, "Report path (CSV path for sweep); default stdout");
  cmd->add_option("--seed", f.seed, "Override the linking seed");
  cmd->add_option("--threads", f.threads, "Worker threads (0 = hardware concurrency)");
  cmd->add_flag("--quiet", f.quiet, "Do not print the report to stdout");
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw hlab::ValidationError("cannot write output '" + path + "'");
  out << text;
  if (!out) throw hlab::ValidationError("failed writing output '" + path + "'");
}

int execute(const std::string& command, const Flags& f) {
  using namespace hlab::cli;
  try {
    hlab::set_thread_count(f.threads);
    Overrides o;
    if (f.grid != 0) o.grid = f.grid;
    if (f.seed >= 0) o.seed = std::uint64_t(f.seed);
    const RunConfig cfg = parse_config(apply_overrides(load_document(f.config), o));
    RunResult r = run(command, cfg);
    const std::string report = r.report.dump(2) + "\n";
    const std::string out_path = !f.out.empty() ? f.out : cfg.output.value_or("");
    if (command == "sweep") {
      if (out_path.empty()) throw hlab::ValidationError("sweep needs --out (or 'output') for the CSV file");
      emit_csv(out_path, r.csv);
      if (!f.quiet) std::cout << report;
    } else if (!out_path.empty()) {
      write_text(out_path, report);
    } else if (!f.quiet) {
      std::cout << report;
    }
    if (r.exit_code == exit_tolerance)
      std::cerr << "hlab " << command << ": tolerance exceeded (see residuals in the report)\n";
    return r.exit_code;
  } catch (const hlab::Error& e) {
    const int code = exit_code_for(e.error_class());
    std::cerr << error_report(command, e.what(), code).dump() << "\n";
    return code;
  } catch (const std::exception& e) {
    std::cerr << error_report(command, e.what(), exit_validation).dump() << "\n";
    return exit_validation;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hlab: helicity, flux, Calabi, mass flow and linking laboratory"};
  app.set_version_flag("--version", std::string(HLAB_VERSION));
  app.require_subcommand(1);
  std::map<std::string, Flags> flags;
  for (const auto& name : hlab::cli::commands()) add_flags(app.add_subcommand(name), flags[name]);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : hlab::cli::exit_validation;
  }
  const std::string command = app.get_subcommands().front()->get_name();
  return execute(command, flags[command]);
}
