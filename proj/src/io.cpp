#include "ssr/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace ssr {

std::string format_double(double value)
{
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

json matrix_to_json(const Matrix& m)
{
    json data = json::array();
    for (Index i = 0; i < m.rows(); ++i)
        for (Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Matrix matrix_from_json(const json& j)
{
    if (!j.is_object() || !j.contains("rows") || !j.contains("cols") || !j.contains("data"))
        throw FormatError("matrix JSON needs rows, cols and data");
    if (!j["rows"].is_number_integer() || !j["cols"].is_number_integer() || !j["data"].is_array())
        throw FormatError("matrix JSON: rows/cols must be integers and data an array");
    const auto rows = j["rows"].get<long long>();
    const auto cols = j["cols"].get<long long>();
    if (rows < 0 || cols < 0) throw FormatError("matrix JSON: negative dimension");
    const auto& data = j["data"];
    if (static_cast<long long>(data.size()) != rows * cols) {
        std::ostringstream msg;
        msg << "matrix JSON: data has " << data.size() << " entries, expected " << rows * cols;
        throw FormatError(msg.str());
    }
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        for (Index c = 0; c < cols; ++c) {
            const auto& v = data[static_cast<std::size_t>(i * cols + c)];
            if (!v.is_number()) throw FormatError("matrix JSON: non-numeric entry");
            m(i, c) = v.get<double>();
        }
    }
    return m;
}

std::string matrix_to_csv(const Matrix& m)
{
    std::string out;
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) {
            if (j > 0) out += ',';
            out += format_double(m(i, j));
        }
        out += '\n';
    }
    return out;
}

namespace {

double parse_field(const std::string& field, std::size_t line)
{
    std::size_t b = field.find_first_not_of(" \t\r");
    std::size_t e = field.find_last_not_of(" \t\r");
    if (b == std::string::npos) throw FormatError("CSV line " + std::to_string(line) + ": empty field");
    const std::string trimmed = field.substr(b, e - b + 1);
    double value = 0.0;
    const char* first = trimmed.data();
    const char* last = trimmed.data() + trimmed.size();
    if (*first == '+') ++first;
    const auto res = std::from_chars(first, last, value);
    if (res.ec != std::errc() || res.ptr != last)
        throw FormatError("CSV line " + std::to_string(line) + ": not a number: '" + trimmed + "'");
    return value;
}

}  // namespace

Matrix matrix_from_csv(const std::string& text)
{
    std::vector<std::vector<double>> rows;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        std::vector<double> row;
        std::size_t start = 0;
        for (;;) {
            const std::size_t comma = line.find(',', start);
            row.push_back(parse_field(line.substr(start, comma - start), line_no));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (!rows.empty() && row.size() != rows.front().size()) {
            std::ostringstream msg;
            msg << "CSV line " << line_no << ": ragged row with " << row.size() << " fields, expected "
                << rows.front().size();
            throw FormatError(msg.str());
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw FormatError("CSV: no rows");
    Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j) m(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
    return m;
}

Matrix matrix_from_csv(const std::string& text, Index rows, Index cols)
{
    Matrix m = matrix_from_csv(text);
    if (m.rows() != rows || m.cols() != cols) {
        std::ostringstream msg;
        msg << "CSV: matrix is " << m.rows() << "x" << m.cols() << ", expected " << rows << "x" << cols;
        throw FormatError(msg.str());
    }
    return m;
}

std::string read_text_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& content)
{
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw FormatError("cannot write " + tmp.string());
        out << content;
        if (!out) throw FormatError("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

json decision_to_json(const RoutingDecision& decision)
{
    json tokens = json::array();
    for (const auto& t : decision.tokens) tokens.push_back({{"support", t.support}, {"weights", t.weights}});
    return {{"branch", to_string(decision.branch)}, {"tokens", std::move(tokens)}};
}

json diagnostics_to_json(const SinkhornDiagnostics& diag)
{
    return {{"iterations_used", diag.iterations_used},
            {"final_row_residual", diag.final_row_residual},
            {"final_col_residual", diag.final_col_residual},
            {"converged", diag.converged},
            {"overflow", diag.overflow},
            {"wall_time_ms", std::chrono::duration<double, std::milli>(diag.wall_time).count()}};
}

json plan_to_json(const TransportPlan& plan)
{
    json j = matrix_to_json(plan.values);
    j["log_u"] = std::vector<double>(plan.log_u.data(), plan.log_u.data() + plan.log_u.size());
    j["log_v"] = std::vector<double>(plan.log_v.data(), plan.log_v.data() + plan.log_v.size());
    return j;
}

std::string train_records_csv(const std::vector<TrainRecord>& records)
{
    std::string out = std::string(kTrainCsvHeader) + "\n";
    for (const auto& r : records) {
        out += std::to_string(r.step) + ',' + format_double(r.loss) + ',' + format_double(r.aux_loss) + ',' +
               to_string(r.branch) + ',' + format_double(r.load.entropy_topk) + ',' +
               format_double(r.load.cv_topk) + ',' + format_double(r.step_ms) + '\n';
    }
    return out;
}

namespace {

json vector_to_json(const Vector& v)
{
    return matrix_to_json(Matrix(v));
}

Vector vector_from_json(const json& j, const char* what)
{
    const Matrix m = matrix_from_json(j);
    if (m.cols() != 1) throw FormatError(std::string("checkpoint: ") + what + " must be a column");
    return m.col(0);
}

}  // namespace

json checkpoint_to_json(const MoEBlock& block)
{
    json experts = json::array();
    for (const auto& e : block.experts)
        experts.push_back({{"w1", matrix_to_json(e.w1)},
                           {"b1", vector_to_json(e.b1)},
                           {"w2", matrix_to_json(e.w2)},
                           {"b2", vector_to_json(e.b2)}});
    return {{"format", "ssr-moe-checkpoint"},
            {"version", 1},
            {"gate", matrix_to_json(block.gate)},
            {"noise_weights", matrix_to_json(block.noise_weights)},
            {"noisy_gating", block.noisy_gating},
            {"experts", std::move(experts)}};
}

MoEBlock block_from_checkpoint(const json& j)
{
    if (!j.is_object() || j.value("format", "") != "ssr-moe-checkpoint")
        throw FormatError("checkpoint: missing or wrong format tag");
    MoEBlock block;
    block.gate = matrix_from_json(j.at("gate"));
    block.noise_weights = matrix_from_json(j.at("noise_weights"));
    block.noisy_gating = j.value("noisy_gating", false);
    const Index n = block.gate.rows();
    const Index d = block.gate.cols();
    if (block.noise_weights.rows() != n || block.noise_weights.cols() != d)
        throw FormatError("checkpoint: noise_weights shape does not match gate");
    const auto& experts = j.at("experts");
    if (!experts.is_array() || static_cast<Index>(experts.size()) != n)
        throw FormatError("checkpoint: expert count does not match gate rows");
    for (const auto& ej : experts) {
        Expert e{matrix_from_json(ej.at("w1")), vector_from_json(ej.at("b1"), "b1"),
                 matrix_from_json(ej.at("w2")), vector_from_json(ej.at("b2"), "b2")};
        const Index h = e.w1.rows();
        if (e.w1.cols() != d || e.b1.size() != h || e.w2.rows() != d || e.w2.cols() != h || e.b2.size() != d)
            throw FormatError("checkpoint: expert parameter shapes are inconsistent");
        block.experts.push_back(std::move(e));
    }
    return block;
}

}  // namespace ssr
