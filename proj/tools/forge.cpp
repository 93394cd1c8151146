// forge: command-line front end for the severity-classification pipeline.

#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

#include "forge/fixture.hpp"
#include "forge/pipeline.hpp"

namespace {

struct CommonOptions {
  std::string config;
  std::string preset;
  std::string out;
  std::string data;
  std::uint64_t seed = 0;
  bool seed_given = false;
};

forge::PipelineConfig make_config(const CommonOptions& o) {
  auto cfg = o.config.empty() ? forge::PipelineConfig::parse("", std::filesystem::current_path(), o.preset)
                              : forge::PipelineConfig::load(o.config, o.preset);
  if (!o.out.empty()) cfg.set("run.out", std::filesystem::absolute(o.out).string());
  if (!o.data.empty()) cfg.set("run.data", std::filesystem::absolute(o.data).string());
  if (o.seed_given) cfg.set("run.seed", std::to_string(o.seed));
  return cfg;
}

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config,-c", o.config, "pipeline config file (INI sections per stage)");
  cmd->add_option("--preset", o.preset, "experiment1 | experiment1-fatal | experiment1-serious | experiment2 | experiment3 | rl-baseline");
  cmd->add_option("--out,-o", o.out, "output directory (default: out)");
  cmd->add_option("--data", o.data, "directory holding accidents/vehicles/casualties CSVs (default: data)");
  cmd->add_option("--seed", o.seed, "base seed (default 1)")->each([&](const std::string&) { o.seed_given = true; });
}

int report(const forge::Error& e) {
  std::cerr << "forge: " << e.what() << "\n";
  return forge::exit_code_for(e.kind());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"forge: merge, clean, analyse, impute, resample and model imbalanced severity data"};
  app.require_subcommand(1);

  CommonOptions common;
  std::string stage_selected;
  for (const auto& stage : forge::stage_names()) {
    auto* cmd = app.add_subcommand(stage, "run the " + stage + " stage");
    add_common(cmd, common);
    cmd->callback([&stage_selected, stage] { stage_selected = stage; });
  }
  auto* run = app.add_subcommand("run", "run every enabled stage in order");
  add_common(run, common);

  forge::FixtureSpec fx;
  std::string fx_out = "data";
  std::vector<double> proportions;
  auto* fixture = app.add_subcommand("fixture", "write a synthetic accidents/vehicles/casualties triple");
  fixture->add_option("--n", fx.n, "casualty rows")->capture_default_str();
  fixture->add_option("--seed", fx.seed, "generator seed")->capture_default_str();
  fixture->add_option("--missingness", fx.missingness, "probability of blanking a cell")->capture_default_str();
  fixture->add_option("--separation", fx.separation, "label signal strength")->capture_default_str();
  fixture->add_option("--proportions", proportions, "slight serious fatal proportions")->expected(3)->delimiter(',');
  fixture->add_option("--out,-o", fx_out, "output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (fixture->parsed()) {
      if (!proportions.empty()) fx.proportions = {proportions[0], proportions[1], proportions[2]};
      auto data = forge::generate_fixture(fx);
      forge::write_fixture(fx_out, data);
      std::cerr << "[forge] fixture: " << fx.n << " casualties (" << data.counts[0] << "/" << data.counts[1] << "/"
                << data.counts[2] << ") in " << fx_out << "\n";
      return 0;
    }
    auto cfg = make_config(common);
    if (run->parsed()) return forge::run_pipeline(cfg);
    forge::Pipeline pipeline(cfg);
    pipeline.run_stage(stage_selected);
    return 0;
  } catch (const forge::Error& e) {
    return report(e);
  }
}
