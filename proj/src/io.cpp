#include "ermdp/io.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace ermdp {

namespace {

constexpr int kFormatVersion = 1;

template <class T>
T get_field(const Json& doc, const char* key) {
    if (!doc.contains(key)) throw Error(ErrorCode::IoError, std::string("missing field '") + key + "'");
    try {
        return doc.at(key).get<T>();
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::IoError, std::string("field '") + key + "': " + e.what());
    }
}

void check_format(const Json& doc, std::string_view expected) {
    if (!doc.is_object()) throw Error(ErrorCode::IoError, "document is not a JSON object");
    if (doc.contains("format") && doc.at("format") != expected)
        throw Error(ErrorCode::IoError, "expected format '" + std::string(expected) + "'");
}

Json flat(const Matrix& m) { return Json(std::vector<double>(m.data(), m.data() + m.size())); }
Json flat(const Vector& v) { return Json(std::vector<double>(v.data(), v.data() + v.size())); }

Matrix matrix_from(const Json& doc, const char* key, int rows, int cols) {
    const auto values = get_field<std::vector<double>>(doc, key);
    if (values.size() != static_cast<std::size_t>(rows) * cols)
        throw Error(ErrorCode::IoError, std::string("field '") + key + "' has wrong length");
    return Eigen::Map<const Matrix>(values.data(), rows, cols);
}

Vector vector_from(const Json& doc, const char* key, int size) {
    const auto values = get_field<std::vector<double>>(doc, key);
    if (values.size() != static_cast<std::size_t>(size))
        throw Error(ErrorCode::IoError, std::string("field '") + key + "' has wrong length");
    return Eigen::Map<const Vector>(values.data(), size);
}

Json transition_to_json(const TransitionTensor& P) {
    const int S = P.num_states();
    const int A = P.num_actions();
    if (!P.is_sparse()) {
        std::vector<double> values;
        values.reserve(static_cast<std::size_t>(A) * S * S);
        for (int a = 0; a < A; ++a)
            for (int s = 0; s < S; ++s)
                for (int j = 0; j < S; ++j) values.push_back(P.dense_rows()(static_cast<Eigen::Index>(s) * A + a, j));
        return values;
    }
    const auto& vals = P.values();
    const bool shared = !vals.empty() && std::all_of(vals.begin(), vals.end(), [&](double x) { return x == vals[0]; });
    Json indices = Json::array();
    Json probs = Json::array();
    for (int a = 0; a < A; ++a) {
        for (int s = 0; s < S; ++s) {
            const std::int64_t row = static_cast<std::int64_t>(s) * A + a;
            std::vector<std::int32_t> idx(P.cols().begin() + P.row_ptr()[row], P.cols().begin() + P.row_ptr()[row + 1]);
            indices.push_back(std::move(idx));
            if (!shared)
                probs.push_back(std::vector<double>(vals.begin() + P.row_ptr()[row], vals.begin() + P.row_ptr()[row + 1]));
        }
    }
    return Json{{"support_indices", std::move(indices)}, {"support_prob", shared ? Json(vals[0]) : std::move(probs)}};
}

TransitionTensor transition_from_json(const Json& doc, int S, int A) {
    if (doc.is_array()) {
        const auto values = doc.get<std::vector<double>>();
        return TransitionTensor::dense(S, A, values);
    }
    const auto indices = get_field<std::vector<std::vector<std::int32_t>>>(doc, "support_indices");
    const std::size_t rows = static_cast<std::size_t>(S) * A;
    if (indices.size() != rows) throw Error(ErrorCode::IoError, "support_indices must have |S||A| rows");
    const Json& prob = doc.at("support_prob");
    std::vector<std::vector<double>> per_row;
    if (prob.is_array()) {
        per_row = prob.get<std::vector<std::vector<double>>>();
        if (per_row.size() != rows) throw Error(ErrorCode::IoError, "support_prob must have |S||A| rows");
    }
    const double shared = prob.is_number() ? prob.get<double>() : 0.0;

    // JSON rows are (a, s) a-major; storage rows are s * A + a.
    std::vector<std::int64_t> row_ptr(rows + 1, 0);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a)
            row_ptr[static_cast<std::size_t>(s) * A + a + 1] = static_cast<std::int64_t>(indices[static_cast<std::size_t>(a) * S + s].size());
    for (std::size_t r = 0; r < rows; ++r) row_ptr[r + 1] += row_ptr[r];
    std::vector<std::int32_t> cols(row_ptr.back());
    std::vector<double> values(row_ptr.back());
    for (int s = 0; s < S; ++s) {
        for (int a = 0; a < A; ++a) {
            const std::size_t src = static_cast<std::size_t>(a) * S + s;
            const std::int64_t dst = row_ptr[static_cast<std::size_t>(s) * A + a];
            if (!per_row.empty() && per_row[src].size() != indices[src].size())
                throw Error(ErrorCode::IoError, "support_prob row length differs from support_indices");
            for (std::size_t k = 0; k < indices[src].size(); ++k) {
                cols[dst + k] = indices[src][k];
                values[dst + k] = per_row.empty() ? shared : per_row[src][k];
            }
        }
    }
    return TransitionTensor::sparse(S, A, std::move(row_ptr), std::move(cols), std::move(values));
}

void put_u32(std::ostream& out, std::uint32_t x) {
    std::array<char, 4> b{};
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((x >> (8 * i)) & 0xffu);
    out.write(b.data(), 4);
}

void put_u64(std::ostream& out, std::uint64_t x) {
    std::array<char, 8> b{};
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((x >> (8 * i)) & 0xffu);
    out.write(b.data(), 8);
}

std::uint64_t get_le(std::istream& in, int bytes) {
    std::array<unsigned char, 8> b{};
    in.read(reinterpret_cast<char*>(b.data()), bytes);
    if (!in) throw Error(ErrorCode::IoError, "truncated buffer file");
    std::uint64_t x = 0;
    for (int i = bytes - 1; i >= 0; --i) x = (x << 8) | b[i];
    return x;
}

void write_column(std::ostream& out, std::span<const std::uint32_t> column) {
    std::vector<char> bytes(column.size() * 4);
    for (std::size_t k = 0; k < column.size(); ++k)
        for (int i = 0; i < 4; ++i) bytes[4 * k + i] = static_cast<char>((column[k] >> (8 * i)) & 0xffu);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::vector<std::uint32_t> read_column(std::istream& in, std::uint64_t n) {
    std::vector<unsigned char> bytes(n * 4);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!in) throw Error(ErrorCode::IoError, "truncated buffer column");
    std::vector<std::uint32_t> column(n);
    for (std::uint64_t k = 0; k < n; ++k)
        column[k] = static_cast<std::uint32_t>(bytes[4 * k]) | static_cast<std::uint32_t>(bytes[4 * k + 1]) << 8 |
                    static_cast<std::uint32_t>(bytes[4 * k + 2]) << 16 |
                    static_cast<std::uint32_t>(bytes[4 * k + 3]) << 24;
    return column;
}

}  // namespace

// MDP -----------------------------------------------------------------------

Json mdp_to_json(const MdpModel& mdp) {
    return Json{{"format", "ermdp.mdp"},
                {"version", kFormatVersion},
                {"num_states", mdp.num_states()},
                {"num_actions", mdp.num_actions()},
                {"gamma", mdp.discount()},
                {"reward", flat(mdp.reward())},
                {"transition", transition_to_json(mdp.transition())}};
}

MdpModel mdp_from_json(const Json& doc) {
    check_format(doc, "ermdp.mdp");
    const int S = get_field<int>(doc, "num_states");
    const int A = get_field<int>(doc, "num_actions");
    if (S <= 0 || A <= 0) throw Error(ErrorCode::IoError, "num_states and num_actions must be positive");
    if (!doc.contains("transition")) throw Error(ErrorCode::IoError, "missing field 'transition'");
    Matrix reward = matrix_from(doc, "reward", S, A);
    try {
        return MdpModel(transition_from_json(doc.at("transition"), S, A), std::move(reward),
                        get_field<double>(doc, "gamma"));
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::IoError, std::string("transition: ") + e.what());
    }
}

// Oracle --------------------------------------------------------------------

Json oracle_to_json(const OracleSolution& solution) {
    return Json{{"format", "ermdp.oracle"},
                {"version", kFormatVersion},
                {"num_states", solution.v_star.size()},
                {"num_actions", solution.pi_star.num_actions()},
                {"tau", solution.tau},
                {"alpha", solution.alpha},
                {"weight", flat(solution.weight.values())},
                {"v_star", flat(solution.v_star)},
                {"pi_star", flat(solution.pi_star.probs())},
                {"u_circ", flat(solution.u_circ.values())},
                {"u_star", flat(solution.u_star.values())},
                {"value_iterations", solution.value_iterations},
                {"value_residual", solution.value_residual}};
}

OracleSolution oracle_from_json(const Json& doc) {
    check_format(doc, "ermdp.oracle");
    const int S = get_field<int>(doc, "num_states");
    const int A = get_field<int>(doc, "num_actions");
    return OracleSolution{vector_from(doc, "v_star", S),
                          Policy(matrix_from(doc, "pi_star", S, A)),
                          DualVariable(matrix_from(doc, "u_circ", S, A)),
                          DualVariable(matrix_from(doc, "u_star", S, A)),
                          get_field<double>(doc, "tau"),
                          get_field<double>(doc, "alpha"),
                          WeightVector(vector_from(doc, "weight", S)),
                          doc.value("value_iterations", 0L),
                          doc.value("value_residual", 0.0)};
}

// Traces --------------------------------------------------------------------

std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    std::array<char, 40> buf{};
    std::snprintf(buf.data(), buf.size(), "%.17g", x);
    return buf.data();
}

void write_trace_csv(std::ostream& out, const SolverTrace& trace) {
    auto opt = [](const std::optional<double>& x) { return x ? format_double(*x) : std::string(); };
    out << kTraceHeader << '\n';
    for (const auto& r : trace.records) {
        out << r.iter << ',' << format_double(r.q) << ',' << opt(r.lyapunov) << ',' << opt(r.policy_error) << ','
            << opt(r.value_error) << ',' << opt(r.fo_residual) << '\n';
    }
}

Json config_to_json(const SolverConfig& config) {
    Json diagnostics = Json::array();
    if (config.diagnostics.lyapunov) diagnostics.push_back("lyapunov");
    if (config.diagnostics.policy_error) diagnostics.push_back("policy_error");
    if (config.diagnostics.value_error) diagnostics.push_back("value_error");
    if (config.diagnostics.fo_residual) diagnostics.push_back("first_order_residual");
    return Json{{"alpha", config.alpha},           {"tau", config.tau},         {"eta", config.eta},
                {"c", config.c},                   {"eps_tol", config.eps_tol}, {"max_iter", config.max_iter},
                {"record_every", config.record_every}, {"diagnostics", diagnostics}};
}

SolverConfig config_from_json(const Json& doc, const SolverConfig& defaults) {
    SolverConfig c = defaults;
    try {
        c.alpha = doc.value("alpha", c.alpha);
        c.tau = doc.value("tau", c.tau);
        c.eta = doc.value("eta", c.eta);
        c.c = doc.value("c", c.c);
        c.eps_tol = doc.value("eps_tol", c.eps_tol);
        c.max_iter = doc.value("max_iter", c.max_iter);
        c.record_every = doc.value("record_every", c.record_every);
        if (doc.contains("diagnostics")) {
            c.diagnostics = DiagnosticSet::none();
            for (const auto& name : doc.at("diagnostics")) {
                const auto n = name.get<std::string>();
                if (n == "lyapunov") c.diagnostics.lyapunov = true;
                else if (n == "policy_error") c.diagnostics.policy_error = true;
                else if (n == "value_error") c.diagnostics.value_error = true;
                else if (n == "first_order_residual" || n == "fo_residual") c.diagnostics.fo_residual = true;
                else throw Error(ErrorCode::InvalidConfig, "unknown diagnostic '" + n + "'");
            }
        }
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, std::string("solver config: ") + e.what());
    }
    return c;
}

Json trace_sidecar(const SolverTrace& trace) {
    Json seeds = Json::object();
    for (const auto& [name, value] : trace.seeds) seeds[name] = value;
    return Json{{"format", "ermdp.trace"},
                {"version", kFormatVersion},
                {"variant", std::string(to_string(trace.variant))},
                {"config", config_to_json(trace.config)},
                {"seeds", seeds},
                {"converged", trace.converged},
                {"iterations", trace.iterations},
                {"records", trace.records.size()},
                {"csv_header", std::string(kTraceHeader)}};
}

// Buffers -------------------------------------------------------------------

void write_buffer(std::ostream& out, const SampleBuffer& buffer) {
    out.write("ERMDPBUF", 8);
    put_u32(out, kFormatVersion);
    put_u32(out, static_cast<std::uint32_t>(buffer.num_states()));
    put_u32(out, static_cast<std::uint32_t>(buffer.num_actions()));
    put_u32(out, 0);
    put_u64(out, buffer.size());
    put_u64(out, buffer.seed());
    write_column(out, buffer.states());
    write_column(out, buffer.actions());
    write_column(out, buffer.next_states());
    if (!out) throw Error(ErrorCode::IoError, "failed writing buffer");
}

SampleBuffer read_buffer(std::istream& in) {
    std::array<char, 8> magic{};
    in.read(magic.data(), 8);
    if (!in || std::string_view(magic.data(), 8) != "ERMDPBUF") throw Error(ErrorCode::IoError, "not a buffer file");
    const auto version = get_le(in, 4);
    if (version != kFormatVersion) throw Error(ErrorCode::IoError, "unsupported buffer version");
    const auto S = static_cast<int>(get_le(in, 4));
    const auto A = static_cast<int>(get_le(in, 4));
    get_le(in, 4);
    const auto n = get_le(in, 8);
    const auto seed = get_le(in, 8);
    auto states = read_column(in, n);
    auto actions = read_column(in, n);
    auto next_states = read_column(in, n);
    return SampleBuffer(S, A, seed, std::move(states), std::move(actions), std::move(next_states));
}

Json buffer_manifest(const SampleBuffer& buffer, const std::string& data_file) {
    return Json{{"format", "ermdp.buffer"},
                {"version", kFormatVersion},
                {"data_file", data_file},
                {"num_states", buffer.num_states()},
                {"num_actions", buffer.num_actions()},
                {"num_samples", buffer.size()},
                {"seed", buffer.seed()},
                {"header_bytes", kBufferHeaderBytes},
                {"column_encoding", "uint32 little-endian"},
                {"columns", {"state", "action", "next_state"}},
                {"uncovered_rows", buffer.uncovered_rows()}};
}

// Files ---------------------------------------------------------------------

std::string fnv1a_hex(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    std::array<char, 17> buf{};
    std::snprintf(buf.data(), buf.size(), "%016llx", static_cast<unsigned long long>(h));
    return buf.data();
}

Json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    try {
        return Json::parse(in);
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::IoError, path.string() + ": " + e.what());
    }
}

void write_text_file(const std::filesystem::path& path, std::string_view content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw Error(ErrorCode::IoError, "failed writing " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

void write_json_file(const std::filesystem::path& path, const Json& doc) { write_text_file(path, doc.dump(2) + "\n"); }

void save_buffer(const std::filesystem::path& data_path, const SampleBuffer& buffer) {
    std::ostringstream out(std::ios::binary);
    write_buffer(out, buffer);
    write_text_file(data_path, out.str());
    std::filesystem::path manifest = data_path;
    manifest += ".json";
    write_json_file(manifest, buffer_manifest(buffer, data_path.filename().string()));
}

SampleBuffer load_buffer(const std::filesystem::path& data_path) {
    std::ifstream in(data_path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + data_path.string());
    return read_buffer(in);
}

}  // namespace ermdp
