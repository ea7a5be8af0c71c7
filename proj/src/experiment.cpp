#include "ermdp/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace ermdp {

namespace {

constexpr int kReportVersion = 1;

double median(std::vector<double> xs) {
    std::sort(xs.begin(), xs.end());
    const std::size_t n = xs.size();
    return n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

Json optional_json(const std::optional<double>& x) { return x ? Json(*x) : Json(nullptr); }

SolverConfig fixed_budget(double alpha, double tau, double eta, double c, long n_iter) {
    SolverConfig config;
    config.alpha = alpha;
    config.tau = tau;
    config.eta = eta;
    config.c = c;
    config.eps_tol = 1e-12;
    config.max_iter = n_iter;
    return config;
}

std::string run_label(const SolverSpec& solver, const std::optional<double>& sigma) {
    std::string label = solver.label.empty() ? std::string(to_string(solver.variant)) : solver.label;
    if (sigma) {
        std::ostringstream s;
        s << label << "_sigma" << *sigma;
        label = s.str();
    }
    return label;
}

template <typename T>
void override_value(const Json& doc, const char* key, T& target) {
    if (doc.contains(key)) target = doc.at(key).get<T>();
}

}  // namespace

std::string_view to_string(ExperimentId id) {
    switch (id) {
        case ExperimentId::Exp1: return "exp1";
        case ExperimentId::Exp2: return "exp2";
        case ExperimentId::Exp3: return "exp3";
        case ExperimentId::Custom: return "custom";
    }
    return "custom";
}

ExperimentId parse_experiment(std::string_view name) {
    if (name == "exp1") return ExperimentId::Exp1;
    if (name == "exp2") return ExperimentId::Exp2;
    if (name == "exp3") return ExperimentId::Exp3;
    if (name == "custom") return ExperimentId::Custom;
    throw Error(ErrorCode::InvalidConfig, "unknown experiment '" + std::string(name) + "'");
}

void ExperimentConfig::validate() const {
    require(!solvers.empty(), ErrorCode::InvalidConfig, "experiment has no solver runs");
    require(instance.num_states > 0 && instance.num_actions > 0 && instance.support > 0, ErrorCode::InvalidConfig,
            "instance dimensions must be positive");
    require(oracle.tau > 0.0, ErrorCode::NonPositiveTau, "oracle tau must be positive");
    require(oracle.alpha > 0.0, ErrorCode::InvalidConfig, "oracle alpha must be positive");
    require(report_format == "json", ErrorCode::InvalidConfig, "only the json report format is supported");
    require(id != ExperimentId::Exp2 || noise.has_value(), ErrorCode::InvalidConfig, "exp2 requires a noise spec");
    require(id != ExperimentId::Exp3 || buffer.has_value(), ErrorCode::InvalidConfig, "exp3 requires a buffer spec");
    if (noise) {
        require(!noise->sigmas.empty(), ErrorCode::InvalidConfig, "noise spec lists no sigma");
        for (double s : noise->sigmas) require(s >= 0.0, ErrorCode::InvalidConfig, "sigma must be nonnegative");
    }
    if (buffer) {
        require(buffer->batch_size > 0 && buffer->batch_size <= buffer->n_samples, ErrorCode::InvalidConfig,
                "batch size must lie in [1, N]");
    }
    for (const auto& s : solvers) {
        s.config.validate(s.variant);
        require(s.config.tau == oracle.tau && s.config.alpha == oracle.alpha, ErrorCode::InvalidConfig,
                "solver (tau, alpha) must match the oracle spec");
        require((!noise && !buffer) || s.variant == Variant::INGAD, ErrorCode::InvalidConfig,
                "noisy and sample-based runs use INGAD");
    }
}

ExperimentConfig experiment_preset(ExperimentId id, std::string_view profile) {
    require(profile == "desk" || profile == "full", ErrorCode::InvalidConfig,
            "unknown profile '" + std::string(profile) + "'");
    ExperimentConfig config;
    config.id = id;
    config.output_dir = std::string(to_string(id));
    switch (id) {
        case ExperimentId::Exp1:
        case ExperimentId::Custom: {
            config.oracle = {0.01, 0.1};
            SolverConfig ngad;
            ngad.alpha = 0.1;
            ngad.tau = 0.01;
            ngad.eta = 3e-4;
            ngad.eps_tol = 1e-5;
            ngad.max_iter = 200'000;
            SolverConfig ingad = ngad;
            ingad.eta = 8e-3;
            ingad.c = 0.98;
            config.solvers = {{"ngad", Variant::NGAD, ngad}, {"ingad", Variant::INGAD, ingad}};
            break;
        }
        case ExperimentId::Exp2:
            config.oracle = {0.1, 0.1};
            config.solvers = {{"ingad", Variant::INGAD, fixed_budget(0.1, 0.1, 0.01, 0.9, 3000)}};
            config.noise = NoiseSpec{};
            break;
        case ExperimentId::Exp3:
            config.instance.gamma = 0.9;
            config.oracle = {0.1, 0.1};
            config.solvers = {{"ingad", Variant::INGAD, fixed_budget(0.1, 0.1, 0.001, 0.9, 12000)}};
            config.buffer = BufferSpec{};
            if (profile == "full") {
                config.buffer->n_samples = 100'000'000;
                config.buffer->batch_size = 100'000;
            }
            break;
    }
    return config;
}

ExperimentConfig experiment_from_json(const Json& doc) {
    try {
        const auto id = parse_experiment(doc.value("experiment", std::string("custom")));
        ExperimentConfig config = experiment_preset(id, doc.value("profile", std::string("desk")));
        if (doc.contains("instance")) {
            const auto& j = doc.at("instance");
            override_value(j, "num_states", config.instance.num_states);
            override_value(j, "num_actions", config.instance.num_actions);
            override_value(j, "support", config.instance.support);
            override_value(j, "seed", config.instance.seed);
            override_value(j, "gamma", config.instance.gamma);
            if (j.contains("mdp_file")) config.instance.mdp_file = j.at("mdp_file").get<std::string>();
        }
        if (doc.contains("oracle")) {
            const auto& j = doc.at("oracle");
            override_value(j, "tau", config.oracle.tau);
            override_value(j, "alpha", config.oracle.alpha);
            override_value(j, "tol", config.oracle.tol);
            override_value(j, "max_iter", config.oracle.max_iter);
            if (j.contains("weight") && j.at("weight") != "ones") {
                throw Error(ErrorCode::InvalidConfig, "only the all-ones weight is supported in configs");
            }
            for (auto& s : config.solvers) {
                s.config.tau = config.oracle.tau;
                s.config.alpha = config.oracle.alpha;
            }
        }
        if (doc.contains("solvers")) {
            // A listed solver replaces the preset with the same label, or is appended.
            for (const auto& j : doc.at("solvers")) {
                auto variant = parse_variant(j.value("variant", std::string("ingad")));
                const auto label = j.value("label", std::string(to_string(variant)));
                auto it = std::find_if(config.solvers.begin(), config.solvers.end(),
                                       [&](const SolverSpec& s) { return s.label == label; });
                if (!j.contains("variant") && it != config.solvers.end()) variant = it->variant;
                SolverConfig base = it != config.solvers.end() ? it->config : SolverConfig{};
                if (it == config.solvers.end()) {
                    base.tau = config.oracle.tau;
                    base.alpha = config.oracle.alpha;
                }
                SolverSpec spec{label, variant, config_from_json(j, base)};
                if (it != config.solvers.end()) *it = spec;
                else config.solvers.push_back(spec);
            }
        }
        if (doc.contains("solvers_only")) {
            const auto keep = doc.at("solvers_only").get<std::vector<std::string>>();
            std::erase_if(config.solvers, [&](const SolverSpec& s) {
                return std::find(keep.begin(), keep.end(), s.label) == keep.end();
            });
        }
        if (doc.contains("noise")) {
            const auto& j = doc.at("noise");
            if (!config.noise) config.noise = NoiseSpec{};
            override_value(j, "sigmas", config.noise->sigmas);
            if (j.contains("sigma")) config.noise->sigmas = {j.at("sigma").get<double>()};
            override_value(j, "seed", config.noise->seed);
        }
        if (doc.contains("buffer")) {
            const auto& j = doc.at("buffer");
            if (!config.buffer) config.buffer = BufferSpec{};
            override_value(j, "n_samples", config.buffer->n_samples);
            override_value(j, "batch_size", config.buffer->batch_size);
            override_value(j, "seed", config.buffer->seed);
            override_value(j, "batch_seed", config.buffer->batch_seed);
            override_value(j, "threads", config.buffer->threads);
            if (j.contains("fallback")) config.buffer->fallback = parse_fallback(j.at("fallback").get<std::string>());
        }
        if (doc.contains("output_dir")) config.output_dir = doc.at("output_dir").get<std::string>();
        override_value(doc, "report_format", config.report_format);
        return config;
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, std::string("experiment config: ") + e.what());
    }
}

MdpModel make_instance(const InstanceSpec& spec) {
    if (spec.mdp_file) return mdp_from_json(read_json_file(*spec.mdp_file));
    return generate_random_mdp(spec.num_states, spec.num_actions, spec.support, spec.seed, spec.gamma);
}

std::string oracle_key(const MdpModel& mdp, const OracleSpec& spec) {
    const Json key{{"mdp", mdp_to_json(mdp)},
                   {"tau", spec.tau},
                   {"alpha", spec.alpha},
                   {"weight", "ones"},
                   {"tol", spec.tol},
                   {"max_iter", spec.max_iter}};
    return fnv1a_hex(key.dump());
}

OracleSolution cached_oracle(const MdpModel& mdp, const OracleSpec& spec, const std::filesystem::path& cache_dir) {
    const double tol = spec.tol > 0.0 ? spec.tol : default_value_iteration_tol(mdp);
    auto compute = [&] {
        return compute_oracle(mdp, spec.tau, spec.alpha, WeightVector::ones(mdp.num_states()), tol, spec.max_iter);
    };
    if (cache_dir.empty()) return compute();
    const auto path = cache_dir / ("oracle_" + oracle_key(mdp, spec) + ".json");
    if (std::filesystem::exists(path)) return oracle_from_json(read_json_file(path));
    auto solution = compute();
    write_json_file(path, oracle_to_json(solution));
    return solution;
}

std::optional<double> lyapunov_monotone_fraction(const SolverTrace& trace, double rel_tol) {
    std::vector<double> values;
    for (const auto& r : trace.records) {
        if (r.lyapunov) values.push_back(*r.lyapunov);
    }
    if (values.size() < 2) return std::nullopt;
    long ok = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] <= values[i - 1] + rel_tol * std::abs(values[i - 1])) ++ok;
    }
    return static_cast<double>(ok) / static_cast<double>(values.size() - 1);
}

std::optional<std::pair<double, double>> lyapunov_decile_medians(const SolverTrace& trace, double fraction) {
    std::vector<double> values;
    for (const auto& r : trace.records) {
        if (r.lyapunov) values.push_back(*r.lyapunov);
    }
    if (values.empty()) return std::nullopt;
    const auto n = std::max<std::size_t>(1, static_cast<std::size_t>(fraction * static_cast<double>(values.size())));
    std::vector<double> first(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(n));
    std::vector<double> last(values.end() - static_cast<std::ptrdiff_t>(n), values.end());
    return std::make_pair(median(std::move(first)), median(std::move(last)));
}

RunSummary summarize(const SolverTrace& trace, std::string exp, std::string label) {
    RunSummary s;
    s.exp = std::move(exp);
    s.label = std::move(label);
    s.variant = std::string(to_string(trace.variant));
    s.iterations = trace.iterations;
    s.converged = trace.converged;
    if (!trace.records.empty()) {
        const auto& last = trace.records.back();
        s.final_value_error = last.value_error;
        s.final_policy_error = last.policy_error;
        s.lyapunov_initial = trace.records.front().lyapunov;
        s.lyapunov_final = last.lyapunov;
    }
    s.monotone_fraction = lyapunov_monotone_fraction(trace);
    return s;
}

Json summary_to_json(const RunSummary& s) {
    Json j{{"exp", s.exp},
           {"label", s.label},
           {"variant", s.variant},
           {"iterations", s.iterations},
           {"converged", s.converged},
           {"diverged", s.diverged},
           {"final_value_error", optional_json(s.final_value_error)},
           {"final_policy_error", optional_json(s.final_policy_error)},
           {"lyapunov_initial", optional_json(s.lyapunov_initial)},
           {"lyapunov_final", optional_json(s.lyapunov_final)},
           {"monotone_fraction", optional_json(s.monotone_fraction)}};
    if (s.sigma) j["sigma"] = *s.sigma;
    return j;
}

ExperimentReport run_experiment(const ExperimentConfig& config) {
    config.validate();
    std::filesystem::create_directories(config.output_dir);

    const MdpModel mdp = make_instance(config.instance);
    const OracleSolution oracle = cached_oracle(mdp, config.oracle, config.output_dir);
    const auto init = SolverState::zeros(mdp.num_states(), mdp.num_actions());
    const std::string exp(to_string(config.id));

    std::optional<SampleBuffer> buffer;
    if (config.buffer) buffer = collect_buffer(mdp, config.buffer->n_samples, config.buffer->seed, config.buffer->threads);

    ExperimentReport report;
    auto emit = [&](SolverTrace trace, const std::string& label, std::optional<double> sigma) {
        std::ostringstream csv;
        write_trace_csv(csv, trace);
        write_text_file(config.output_dir / (label + ".csv"), csv.str());
        RunSummary summary = summarize(trace, exp, label);
        summary.sigma = sigma;
        Json sidecar = trace_sidecar(trace);
        sidecar["summary"] = summary_to_json(summary);
        write_json_file(config.output_dir / (label + ".json"), sidecar);
        report.runs.push_back(std::move(summary));
        report.traces.push_back(std::move(trace));
    };

    for (const auto& solver : config.solvers) {
        if (config.noise) {
            for (double sigma : config.noise->sigmas) {
                emit(run_noisy_reward_ingad(mdp, {sigma, config.noise->seed}, solver.config, init, &oracle),
                     run_label(solver, sigma), sigma);
            }
        } else if (buffer) {
            emit(run_sample_based_ingad(mdp, *buffer, solver.config, config.buffer->batch_size, init, &oracle,
                                        config.buffer->batch_seed, config.buffer->fallback),
                 run_label(solver, std::nullopt), std::nullopt);
        } else {
            emit(run_solver(mdp, solver.config, init, solver.variant, &oracle), run_label(solver, std::nullopt),
                 std::nullopt);
        }
    }

    Json runs = Json::array();
    for (const auto& r : report.runs) runs.push_back(summary_to_json(r));
    Json comparison{{"format", "ermdp.comparison"},
                    {"version", kReportVersion},
                    {"exp", exp},
                    {"oracle_key", oracle_key(mdp, config.oracle)},
                    {"runs", runs}};
    const auto ngad = std::find_if(report.runs.begin(), report.runs.end(),
                                   [](const RunSummary& r) { return r.variant == "ngad"; });
    const auto ingad = std::find_if(report.runs.begin(), report.runs.end(),
                                    [](const RunSummary& r) { return r.variant == "ingad"; });
    if (ngad != report.runs.end() && ingad != report.runs.end() && ingad->iterations > 0) {
        comparison["iteration_ratio"] =
            static_cast<double>(ngad->iterations) / static_cast<double>(ingad->iterations);
    }
    write_json_file(config.output_dir / "comparison.json", comparison);
    report.comparison = std::move(comparison);
    return report;
}

std::vector<SweepCell> run_sweep(const MdpModel& mdp, const OracleSolution* oracle, Variant variant,
                                 const SolverConfig& base, const std::vector<double>& etas,
                                 const std::vector<double>& cs) {
    std::vector<SweepCell> cells;
    const auto init = SolverState::zeros(mdp.num_states(), mdp.num_actions());
    for (double c : cs) {
        const std::size_t first = cells.size();
        for (double eta : etas) {
            const Variant cell_variant = c == 0.0 ? variant : Variant::INGAD;
            SolverConfig config = base;
            config.eta = eta;
            config.c = c;
            config.diagnostics = DiagnosticSet::none();
            SweepCell cell;
            cell.eta = eta;
            cell.c = c;
            try {
                const auto trace = run_solver(mdp, config, init, cell_variant, oracle);
                cell.converged = trace.converged;
                cell.iterations = trace.iterations;
                cell.final_q = trace.records.empty() ? 0.0 : trace.records.back().q;
            } catch (const DivergenceError& e) {
                cell.diverged = true;
                cell.iterations = e.iteration();
                cell.final_q = std::numeric_limits<double>::infinity();
            }
            cells.push_back(cell);
        }
        SweepCell* best = nullptr;
        for (std::size_t i = first; i < cells.size(); ++i) {
            if (cells[i].converged && (best == nullptr || cells[i].eta > best->eta)) best = &cells[i];
        }
        if (best != nullptr) best->largest_stable = true;
    }
    return cells;
}

std::string sweep_to_csv(const std::vector<SweepCell>& cells) {
    std::ostringstream out;
    out << "eta,c,status,iterations,final_q,largest_stable\n";
    for (const auto& cell : cells) {
        const char* status = cell.diverged ? "diverged" : (cell.converged ? "converged" : "not_converged");
        out << format_double(cell.eta) << ',' << format_double(cell.c) << ',' << status << ',' << cell.iterations
            << ',' << format_double(cell.final_q) << ',' << (cell.largest_stable ? 1 : 0) << '\n';
    }
    return out.str();
}

int exit_code_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::MaxIterExceeded: return kExitNotConverged;
        case ErrorCode::NonFiniteState: return kExitDiverged;
        default: return kExitIoOrConfig;
    }
}

}  // namespace ermdp
