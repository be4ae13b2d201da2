#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "casimir/cli.hpp"

namespace cli = casimir::cli;

namespace {

struct Options {
  std::string config;
  std::vector<std::string> overrides;
  std::string output;
  std::string format;
};

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

int execute(cli::Geometry geometry, const Options& opt) {
  try {
    std::ifstream in(opt.config);
    if (!in) throw cli::IoError("cannot read config '" + opt.config + "'");
    std::stringstream text;
    text << in.rdbuf();
    auto config = cli::parse_config(text.str(), geometry, opt.overrides,
                                    std::filesystem::path(opt.config).parent_path());
    if (!opt.format.empty()) config.format = opt.format == "json" ? cli::Format::Json : cli::Format::Csv;
    if (!opt.output.empty()) config.output_path = opt.output;

    const auto result = cli::run(config);
    auto meta = cli::describe(config);
    meta.emplace_back("generated", utc_timestamp());

    if (config.output_path.empty() || config.output_path == "-") {
      cli::write(std::cout, config.format, result, meta);
      std::cout.flush();
      if (!std::cout) throw cli::IoError("write to stdout failed");
    } else {
      std::ofstream out(config.output_path);
      if (!out) throw cli::IoError("cannot open '" + config.output_path + "' for writing");
      cli::write(out, config.format, result, meta);
      out.close();
      if (!out) throw cli::IoError("write to '" + config.output_path + "' failed");
    }
    std::cerr << cli::summary(result);
    return result.exit_code();
  } catch (const cli::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return cli::kConfigError;
  } catch (const cli::IoError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return cli::kIoError;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Casimir energies, forces and PFA ratios from the scattering approach"};
  app.set_version_flag("--version", std::string(cli::kVersion));
  app.require_subcommand(1);

  Options opt;
  const std::vector<std::pair<cli::Geometry, std::string>> commands = {
      {cli::Geometry::Plates, "plane-plane free energy and pressure"},
      {cli::Geometry::Sphere, "plane-sphere energy, force, gradient and PFA ratios"},
      {cli::Geometry::Corrugation, "lateral response kernel of corrugated plates"},
      {cli::Geometry::OneDim, "1d two-mirror cavity"}};
  std::vector<std::pair<CLI::App*, cli::Geometry>> subs;
  for (const auto& [g, help] : commands) {
    auto* sub = app.add_subcommand(cli::geometry_name(g), help);
    sub->add_option("--config", opt.config, "configuration file")->required();
    sub->add_option("--set", opt.overrides, "override, section.key=value (repeatable)");
    sub->add_option("--output,-o", opt.output, "output path, '-' for stdout");
    sub->add_option("--format", opt.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    subs.emplace_back(sub, g);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return cli::kConfigError;
  }
  for (const auto& [sub, g] : subs)
    if (sub->parsed()) return execute(g, opt);
  return cli::kConfigError;
}
