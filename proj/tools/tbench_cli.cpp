// Command-line front end over the tbench C API.
//
// Exit codes: 0 success, 1 internal/adapter error, 2 bad config or input.

#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tbench/tbench.h"

namespace {

int exit_code_for(tbench_status status) {
  switch (status) {
    case TBENCH_OK:
      return 0;
    case TBENCH_ERR_INVALID_INPUT:
    case TBENCH_ERR_IO:
      return 2;
    default:
      return 1;
  }
}

int report_failure(tbench_status status) {
  std::fprintf(stderr, "tbench: %s: %s\n", tbench_status_string(status), tbench_last_error());
  return exit_code_for(status);
}

struct Options {
  std::string config;
  std::vector<std::string> adapters;
  std::string levels;
  double tolerance = -1.0;
  std::string out;
};

std::vector<double> split_levels(const std::string& text) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find(',', start);
    if (end == std::string::npos) end = text.size();
    const auto piece = text.substr(start, end - start);
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(piece, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != piece.size()) throw CLI::ValidationError("--levels", "not a number: '" + piece + "'");
    out.push_back(v);
    start = end + 1;
  }
  return out;
}

// Opens the session and applies flag overrides. Returns 0 or an exit code.
int open_session(const Options& opt, tbench_session** session) {
  const auto levels = opt.levels.empty() ? std::vector<double>{} : split_levels(opt.levels);
  if (auto st = tbench_session_open(opt.config.c_str(), session); st != TBENCH_OK) return report_failure(st);
  tbench_status st = TBENCH_OK;
  if (!levels.empty()) st = tbench_session_set_levels(*session, levels.data(), levels.size());
  if (st == TBENCH_OK && opt.tolerance >= 0.0) st = tbench_session_set_tolerance(*session, opt.tolerance);
  if (st == TBENCH_OK && !opt.out.empty()) st = tbench_session_set_output_dir(*session, opt.out.c_str());
  for (const auto& name : opt.adapters) {
    if (st != TBENCH_OK) break;
    st = tbench_session_select_adapter(*session, name.c_str());
  }
  if (st != TBENCH_OK) {
    tbench_session_free(*session);
    *session = nullptr;
    return report_failure(st);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Timbre alignment benchmark for joint language-audio embeddings"};
  app.set_version_flag("--version", std::string(tbench_version()));
  app.require_subcommand(1, 1);

  Options opt;
  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", opt.config, "Run configuration (JSON)")->required();
    cmd->add_option("--adapter", opt.adapters, "Restrict to the named adapter (repeatable)");
    cmd->add_option("--levels", opt.levels, "Effect levels, e.g. 0.3,0.6,1.0");
    cmd->add_option("--tolerance", opt.tolerance, "Trend flatness tolerance")->check(CLI::NonNegativeNumber);
    cmd->add_option("--out", opt.out, "Output directory");
  };

  auto* render = app.add_subcommand("render", "Render EQ/reverb variants of the reference audio");
  auto* embed = app.add_subcommand("embed", "Embed descriptors, instrument clips and rendered audio");
  auto* eval_instruments = app.add_subcommand("eval-instruments", "Correlate similarities with human ratings");
  auto* eval_effects = app.add_subcommand("eval-effects", "Classify similarity trends across effect levels");
  auto* report = app.add_subcommand("report", "Consolidate evaluation outputs into report.md");
  for (auto* cmd : {render, embed, eval_instruments, eval_effects, report}) add_common(cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  tbench_session* session = nullptr;
  int rc = 0;
  try {
    rc = open_session(opt, &session);
  } catch (const CLI::ValidationError& e) {
    std::fprintf(stderr, "tbench: %s\n", e.what());
    return 2;
  }
  if (rc != 0) return rc;

  tbench_status st = TBENCH_OK;
  if (render->parsed()) {
    st = tbench_session_render(session, nullptr);
  } else if (embed->parsed()) {
    st = tbench_session_embed(session);
  } else if (eval_instruments->parsed()) {
    st = tbench_session_eval_instruments(session);
  } else if (eval_effects->parsed()) {
    st = tbench_session_eval_effects(session);
  } else if (report->parsed()) {
    st = tbench_session_report(session);
  }
  if (st == TBENCH_OK) {
    std::fputs(tbench_session_summary(session), stdout);
  } else {
    rc = report_failure(st);
  }
  tbench_session_free(session);
  return rc;
}
