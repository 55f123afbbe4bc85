#include "ipll/config.hpp"
#include "ipll/datagen.hpp"
#include "ipll/trainer.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <sstream>

namespace {

int cmd_gen(const std::string& spec_path, const std::string& out_path) {
  const ipll::GenSpec spec = ipll::load_gen_spec_file(spec_path);
  const ipll::LabeledDataset dataset = ipll::make_gaussian_dataset(spec.dataset);
  const ipll::TaskStream stream = ipll::build_blurry_stream(dataset, spec.stream);
  ipll::write_stream_file(out_path, stream);
  int n_train = 0;
  for (const auto& task : stream.train) n_train += static_cast<int>(task.size());
  std::cout << "wrote " << out_path << ": " << stream.num_tasks << " tasks, "
            << n_train << " train / " << stream.test.size() << " test samples\n";
  return 0;
}

int cmd_run(const std::string& stream_path, const std::string& config_path,
            const std::string& out_dir) {
  const ipll::TaskStream stream = ipll::read_stream_file(stream_path);
  const ipll::PGDRConfig config = ipll::load_run_config_file(config_path);
  const ipll::ExperimentResult result = ipll::run_to_dir(stream, config, out_dir);
  std::cout << "variant " << ipll::to_string(config.variant)
            << ": average incremental accuracy "
            << result.report.a_bar << "\n";
  return 0;
}

int cmd_ablate(const std::string& stream_path, const std::string& config_path,
               const std::string& variants_csv, const std::string& out_dir) {
  const ipll::TaskStream stream = ipll::read_stream_file(stream_path);
  ipll::PGDRConfig config = ipll::load_run_config_file(config_path);
  std::istringstream vs(variants_csv);
  std::string name;
  while (std::getline(vs, name, ',')) {
    config.variant = ipll::variant_from_string(name);
    const auto dir = std::filesystem::path(out_dir) / name;
    const ipll::ExperimentResult result =
        ipll::run_to_dir(stream, config, dir.string());
    std::cout << name << ": a_bar " << result.report.a_bar << "\n";
  }
  return 0;
}

int cmd_report(const std::string& in_dir) {
  ipll::aggregate_report_dir(in_dir);
  std::cout << "wrote " << in_dir << "/summary.csv and " << in_dir << "/long.csv\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Incremental partial-label learning laboratory"};
  app.require_subcommand(1);

  std::string spec_path, out_path, stream_path, config_path, out_dir, variants, in_dir;

  CLI::App* gen = app.add_subcommand("gen", "Generate a dataset + task stream file");
  gen->add_option("--spec", spec_path, "Generator spec (key = value)")->required();
  gen->add_option("--out", out_path, "Output stream file")->required();

  CLI::App* run = app.add_subcommand("run", "Train one variant on a stream");
  run->add_option("--stream", stream_path, "Stream file from `gen`")->required();
  run->add_option("--config", config_path, "Trainer config (key = value)")->required();
  run->add_option("--out-dir", out_dir, "Output directory")->required();

  CLI::App* ablate = app.add_subcommand("ablate", "Run several variants on one stream");
  ablate->add_option("--stream", stream_path, "Stream file from `gen`")->required();
  ablate->add_option("--config", config_path, "Trainer config")->required();
  ablate->add_option("--variants", variants, "Comma-separated variant tags")->required();
  ablate->add_option("--out-dir", out_dir, "Output directory")->required();

  CLI::App* report = app.add_subcommand("report", "Aggregate run directories");
  report->add_option("--in-dir", in_dir, "Directory holding per-variant runs")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen(spec_path, out_path);
    if (run->parsed()) return cmd_run(stream_path, config_path, out_dir);
    if (ablate->parsed()) return cmd_ablate(stream_path, config_path, variants, out_dir);
    if (report->parsed()) return cmd_report(in_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
