#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "qfi/calibration.hpp"
#include "qfi/harness.hpp"
#include "qfi/records_io.hpp"
#include "qfi/shadows.hpp"

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

constexpr int kExitValidation = 2;
constexpr int kExitGuard = 3;

struct GlobalOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    int threads = 0;
    std::string out_dir;
};

std::vector<std::pair<int, int>> parse_pairs(const std::string& text) {
    std::vector<std::pair<int, int>> pairs;
    if (text.empty()) return pairs;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const std::size_t comma = text.find(',', pos);
        const std::string token = text.substr(pos, comma == std::string::npos ? comma : comma - pos);
        const std::size_t colon = token.find(':');
        if (colon == std::string::npos)
            throw qfi::harness::config_error("pair syntax is j:j' (e.g. 4:5)");
        pairs.emplace_back(std::stoi(token.substr(0, colon)), std::stoi(token.substr(colon + 1)));
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return pairs;
}

qfi::harness::RunConfig make_config(qfi::harness::ExperimentKind kind, const GlobalOptions& g) {
    qfi::harness::RunConfig config;
    if (!g.config_path.empty()) {
        config = qfi::harness::load_config_file(g.config_path);
        if (config.kind != kind)
            throw qfi::harness::config_error(
                std::string("config experiment kind does not match subcommand '") +
                qfi::harness::kind_tag(kind) + "'");
    } else {
        config.kind = kind;
    }
    if (g.seed) {
        config.seed = *g.seed;
        config.seed_set = true;
    }
    if (!config.seed_set)
        throw qfi::harness::config_error("a seed is mandatory (--seed or config)");
    if (!g.out_dir.empty()) config.out_dir = g.out_dir;
    return config;
}

void emit_figure(const qfi::harness::FigureTable& table, const std::string& out_dir) {
    if (out_dir.empty()) {
        std::cout << qfi::harness::figure_to_json(table).dump(2) << '\n';
        return;
    }
    fs::create_directories(out_dir);
    const std::string base = (fs::path(out_dir) / table.experiment).string();
    qfi::harness::write_figure_csv(base + ".csv", table);
    std::ofstream out(base + ".json");
    out << qfi::harness::figure_to_json(table).dump(2) << '\n';
    std::cout << "wrote " << base << ".csv and " << base << ".json\n";
}

int run_experiment_command(qfi::harness::ExperimentKind kind, const GlobalOptions& g,
                           bool save_records) {
    auto config = make_config(kind, g);
    const auto table = qfi::harness::run_experiment(config);
    emit_figure(table, config.out_dir);

    if (save_records) {
        if (config.out_dir.empty())
            throw qfi::harness::config_error("--save-records requires --out-dir");
        // re-run the first grid point's pipeline keeping records, so the
        // post-processing-only workflow (calibrate/estimate on files) can be
        // exercised on realistic data
        const int n = config.n_list.empty() ? 4 : config.n_list.front();
        const std::uint64_t seed = config.seed;
        const auto plan = config.plan.instantiate(n, seed);
        const auto model = config.noise.instantiate(n);
        qfi::states::PureState zero;
        zero.n_qubits = n;
        zero.amplitudes = qfi::CVec::Zero(qfi::dim_of(n));
        zero.amplitudes[0] = 1.0;
        const auto cal = qfi::sampling::run_protocol(
            qfi::sampling::StateInput(zero), plan, model, qfi::sampling::Purpose::Calibration);
        const auto est = qfi::sampling::run_protocol(
            qfi::sampling::StateInput(qfi::states::ghz(n)), plan, model,
            qfi::sampling::Purpose::Estimation);
        qfi::records_io::write_records_file((fs::path(config.out_dir) / "cal.jsonl").string(),
                                            cal);
        qfi::records_io::write_records_file((fs::path(config.out_dir) / "est.jsonl").string(),
                                            est);
        std::cout << "wrote cal.jsonl and est.jsonl (N=" << n << ")\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Randomized-measurement simulator and QFI estimator suite"};
    app.require_subcommand(1);

    GlobalOptions g;
    app.add_option("--config", g.config_path, "run configuration JSON")->expected(1);
    app.add_option("--seed", g.seed, "master seed (overrides config)");
    app.add_option("--threads", g.threads, "worker thread count (0: default)");
    app.add_option("--out-dir", g.out_dir, "output directory");

    // calibrate
    auto* cal_cmd = app.add_subcommand("calibrate", "estimate survival probabilities from records");
    std::string cal_records, cal_out, cal_method = "enhanced", cal_pairs;
    cal_cmd->add_option("--records", cal_records, "calibration records (JSONL)")->required();
    cal_cmd->add_option("--out", cal_out, "output table JSON")->required();
    cal_cmd->add_option("--method", cal_method, "plain|enhanced");
    cal_cmd->add_option("--pairs", cal_pairs, "qubit pairs j:j',... for cross-talk diagnostics");

    // estimate
    auto* est_cmd = app.add_subcommand("estimate", "robust batch shadows and QFI lower bounds");
    std::string est_records, est_table, est_out, est_observable = "collective-z";
    int est_batches = 10;
    std::string est_orders = "0,1,2";
    bool est_purity = false;
    est_cmd->add_option("--records", est_records, "estimation records (JSONL)")->required();
    est_cmd->add_option("--calibration", est_table, "calibration table JSON")->required();
    est_cmd->add_option("--batches", est_batches, "number of batch shadows");
    est_cmd->add_option("--orders", est_orders, "comma-separated bound orders (0..3)");
    est_cmd->add_option("--observable", est_observable, "observable (collective-z)");
    est_cmd->add_option("--out", est_out, "output results JSON")->required();
    est_cmd->add_flag("--purity", est_purity, "also estimate Tr(rho^2)");

    // experiment subcommands
    bool save_records = false;
    auto* ghz_cmd = app.add_subcommand("ghz", "GHZ lower-bound reproduction");
    ghz_cmd->add_flag("--save-records", save_records,
                      "persist cal/est record files for the first N");
    auto* tfim_cmd = app.add_subcommand("tfim", "critical TFIM variational pipeline");
    auto* eta_cmd = app.add_subcommand("eta-scan", "noise origin scan over unitary layers");
    auto* budget_cmd = app.add_subcommand("budget-scan", "measurement budget scaling for F2");
    auto* gscan_cmd = app.add_subcommand("gscan", "survival-probability estimator study");
    auto* loc_cmd = app.add_subcommand("locality", "cross-talk locality diagnostics");
    auto* cmp_cmd = app.add_subcommand("calib-compare", "per-iteration vs upfront calibration");

    CLI11_PARSE(app, argc, argv);

#ifdef _OPENMP
    if (g.threads > 0) omp_set_num_threads(g.threads);
#endif

    try {
        if (cal_cmd->parsed()) {
            const auto records = qfi::records_io::read_records_file(cal_records);
            const auto table = qfi::calibration::build_table(
                records, qfi::calibration::method_from_tag(cal_method), parse_pairs(cal_pairs));
            qfi::calibration::write_table_file(cal_out, table);
            const auto low = table.flag_low();
            for (const auto& [i, j] : low)
                std::cerr << "warning: G <= 1/2 for qubit " << j << " in iteration " << i
                          << "\n";
            std::cout << "wrote " << cal_out << " (" << table.iterations.size()
                      << " iterations)\n";
            return 0;
        }

        if (est_cmd->parsed()) {
            if (est_observable != "collective-z")
                throw qfi::harness::config_error("only the collective-z observable is supported");
            const auto records = qfi::records_io::read_records_file(est_records);
            const auto table = qfi::calibration::read_table_file(est_table);
            std::vector<int> orders;
            for (const auto& tok : CLI::detail::split(est_orders, ','))
                orders.push_back(std::stoi(tok));

            const auto a = qfi::qmath::collective_spin_z(records.front().n_qubits);
            const auto robust = qfi::shadows::build_batch_shadows(
                records, table, est_batches, qfi::shadows::Mode::Robust);
            const auto raw = qfi::shadows::build_batch_shadows(records, table, est_batches,
                                                               qfi::shadows::Mode::Raw);
            const auto ests_robust = qfi::shadows::ustat_f_orders(robust, a, orders);
            const auto ests_raw = qfi::shadows::ustat_f_orders(raw, a, orders);

            json out;
            out["observable"] = est_observable;
            out["n_batches"] = est_batches;
            out["estimates"] = json::array();
            for (std::size_t k = 0; k < orders.size(); ++k) {
                out["estimates"].push_back(
                    {{"order", orders[k]},
                     {"robust",
                      {{"value", ests_robust[k].value}, {"stderr", ests_robust[k].stderr_}}},
                     {"raw", {{"value", ests_raw[k].value}, {"stderr", ests_raw[k].stderr_}}}});
            }
            if (est_purity) {
                const auto pr = qfi::shadows::ustat_purity(robust);
                const auto pw = qfi::shadows::ustat_purity(raw);
                out["purity"] = {{"robust", {{"value", pr.value}, {"stderr", pr.stderr_}}},
                                 {"raw", {{"value", pw.value}, {"stderr", pw.stderr_}}}};
            }
            std::ofstream f(est_out);
            if (!f) throw std::runtime_error("cannot open for writing: " + est_out);
            f << out.dump(2) << '\n';
            std::cout << "wrote " << est_out << '\n';
            return 0;
        }

        if (ghz_cmd->parsed())
            return run_experiment_command(qfi::harness::ExperimentKind::Ghz, g, save_records);
        if (tfim_cmd->parsed())
            return run_experiment_command(qfi::harness::ExperimentKind::Tfim, g, false);
        if (eta_cmd->parsed())
            return run_experiment_command(qfi::harness::ExperimentKind::EtaScan, g, false);
        if (budget_cmd->parsed())
            return run_experiment_command(qfi::harness::ExperimentKind::BudgetScan, g, false);
        if (gscan_cmd->parsed())
            return run_experiment_command(qfi::harness::ExperimentKind::GScan, g, false);
        if (loc_cmd->parsed())
            return run_experiment_command(qfi::harness::ExperimentKind::Locality, g, false);
        if (cmp_cmd->parsed())
            return run_experiment_command(qfi::harness::ExperimentKind::CalibCompare, g, false);
    } catch (const qfi::mitigation_guard_error& ex) {
        std::cerr << "numerical guard: " << ex.what() << '\n';
        return kExitGuard;
    } catch (const qfi::harness::config_error& ex) {
        std::cerr << "invalid configuration: " << ex.what() << '\n';
        return kExitValidation;
    } catch (const std::invalid_argument& ex) {
        std::cerr << "invalid input: " << ex.what() << '\n';
        return kExitValidation;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << '\n';
        return 1;
    }
    return 0;
}
