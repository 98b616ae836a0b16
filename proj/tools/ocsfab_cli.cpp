#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include <fmt/format.h>

#include "ocsfab/optical_link.hpp"
#include "ocsfab/report_format.hpp"
#include "ocsfab/scenario.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitAborted = 2;

bool write_output(const std::string& text, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << text;
        return true;
    }
    std::ofstream out(out_path, std::ios::binary);
    if (!out) {
        std::cerr << "cannot write " << out_path << "\n";
        return false;
    }
    out << text;
    return static_cast<bool>(out);
}

void print_violations(const std::vector<std::string>& violations) {
    for (const auto& v : violations) std::cerr << "invalid: " << v << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Optical circuit switched fabric simulator"};
    app.require_subcommand(1);

    std::string format = "json";
    std::string out_path;

    std::string run_config;
    std::uint64_t seed_override = 0;
    auto* run = app.add_subcommand("run", "Run a scenario and print its report");
    run->add_option("config", run_config, "Scenario JSON file")->required();
    auto* seed_opt = run->add_option("--seed-override", seed_override, "Replace the config seed");
    run->add_option("--format", format, "json or text")->check(CLI::IsMember({"json", "text"}));
    run->add_option("--out", out_path, "Write the report here instead of stdout");

    std::string validate_config;
    auto* validate = app.add_subcommand("validate", "Check a scenario config and list every violation");
    validate->add_option("config", validate_config, "Scenario JSON file")->required();
    validate->add_option("--format", format, "json or text")->check(CLI::IsMember({"json", "text"}));
    validate->add_option("--out", out_path, "Write the result here instead of stdout");

    double epsilon = 0.0;
    std::string modulation;
    std::size_t samples = 1'000'000;
    std::uint64_t seed = 1;
    auto* oracle = app.add_subcommand("mpi-oracle", "Monte Carlo MPI penalty at the 99.9th percentile");
    oracle->add_option("--epsilon", epsilon, "Aggregate reflection power ratio")->required()->check(CLI::Range(0.0, 1.0));
    oracle->add_option("--modulation", modulation, "nrz or pam4")->required()->check(CLI::IsMember({"nrz", "pam4"}));
    oracle->add_option("--samples", samples, "Monte Carlo samples")->check(CLI::PositiveNumber);
    oracle->add_option("--seed", seed, "RNG seed");
    oracle->add_option("--format", format, "json or text")->check(CLI::IsMember({"json", "text"}));
    oracle->add_option("--out", out_path, "Write the result here instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitInvalid;
    }

    try {
        if (*validate) {
            const auto parsed = ocsfab::parse_config_file(validate_config);
            std::string text;
            if (format == "json") {
                ocsfab::Json j{{"valid", parsed.ok()}, {"violations", parsed.violations}};
                text = j.dump(2) + "\n";
            } else {
                text = parsed.ok() ? "valid\n" : "";
                for (const auto& v : parsed.violations) text += "invalid: " + v + "\n";
            }
            if (!write_output(text, out_path)) return kExitInvalid;
            return parsed.ok() ? kExitOk : kExitInvalid;
        }

        if (*run) {
            auto parsed = ocsfab::parse_config_file(run_config);
            if (!parsed.ok()) {
                print_violations(parsed.violations);
                return kExitInvalid;
            }
            if (*seed_opt) parsed.config->override_seed(seed_override);
            const auto report = ocsfab::run_scenario(*parsed.config);
            const auto fmt_kind = format == "text" ? ocsfab::ReportFormat::Text : ocsfab::ReportFormat::Json;
            if (!write_output(ocsfab::emit_report(report, fmt_kind), out_path)) return kExitAborted;
            if (report.aborted) {
                std::cerr << "aborted at action " << report.aborted_action.value_or(-1) << ": " << report.abort_cause << "\n";
                return kExitAborted;
            }
            return kExitOk;
        }

        const auto mod = *ocsfab::parse_modulation(modulation);
        const auto result = ocsfab::mpi_oracle(epsilon, mod, samples, seed);
        const double closed = ocsfab::mpi_penalty_db(epsilon, mod);
        std::string text;
        if (format == "json") {
            ocsfab::Json j{{"epsilon", epsilon},
                           {"modulation", modulation},
                           {"samples", result.samples},
                           {"seed", seed},
                           {"penalty_p999_db", ocsfab::number_json(result.penalty_p999_db)},
                           {"closed_form_db", ocsfab::number_json(closed)}};
            text = j.dump(2) + "\n";
        } else {
            text = fmt::format("penalty_p999_db {:.6g}\nclosed_form_db {:.6g}\nsamples {}\n", result.penalty_p999_db,
                               closed, result.samples);
        }
        return write_output(text, out_path) ? kExitOk : kExitInvalid;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitAborted;
    }
}
