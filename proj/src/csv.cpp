#include "qpanel/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

#include "qpanel/errors.hpp"

namespace qpanel {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

bool parse_double(const std::string& token, double& out) {
    if (token.empty()) return false;
    const char* begin = token.data();
    const char* end = begin + token.size();
    if (*begin == '+') ++begin;
    auto [ptr, ec] = std::from_chars(begin, end, out);
    return ec == std::errc() && ptr == end;
}

// Dense indices for a set of tokens: numeric order if all are numbers.
std::vector<std::string> sorted_tokens(const std::unordered_map<std::string, int>& seen) {
    std::vector<std::string> tokens;
    tokens.reserve(seen.size());
    for (const auto& [token, _] : seen) tokens.push_back(token);

    bool numeric = true;
    std::vector<double> values(tokens.size());
    for (std::size_t k = 0; k < tokens.size() && numeric; ++k) {
        numeric = parse_double(tokens[k], values[k]);
    }
    if (numeric) {
        std::vector<std::size_t> order(tokens.size());
        for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (values[a] != values[b]) return values[a] < values[b];
            return tokens[a] < tokens[b];
        });
        std::vector<std::string> out;
        out.reserve(tokens.size());
        for (auto k : order) out.push_back(tokens[k]);
        return out;
    }
    std::sort(tokens.begin(), tokens.end());
    return tokens;
}

}  // namespace

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) {
        field = trim(field);
        if (field.size() >= 2 && field.front() == '"' && field.back() == '"') {
            field = field.substr(1, field.size() - 2);
        }
        fields.push_back(field);
    }
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

LoadedPanel read_panel_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw DataError("CSV input is empty");
    const auto header = split_csv_line(line);
    if (header.size() < 4 || header[0] != "id" || header[1] != "t" || header[2] != "y") {
        throw DataError("CSV header must be id,t,y,x1,...,xd");
    }
    const std::size_t d = header.size() - 3;

    struct Row {
        std::string id;
        std::string t;
        std::vector<double> values;  // y, x1..xd
    };
    std::vector<Row> rows;
    std::unordered_map<std::string, int> ids;
    std::unordered_map<std::string, int> periods;

    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto fields = split_csv_line(line);
        if (fields.size() != header.size()) {
            std::ostringstream os;
            os << "line " << line_no << ": expected " << header.size() << " fields, got "
               << fields.size();
            throw DataError(os.str());
        }
        Row row{fields[0], fields[1], std::vector<double>(d + 1)};
        if (row.id.empty() || row.t.empty()) {
            throw DataError("line " + std::to_string(line_no) + ": empty id or t");
        }
        for (std::size_t k = 0; k <= d; ++k) {
            if (!parse_double(fields[k + 2], row.values[k]) || !std::isfinite(row.values[k])) {
                std::ostringstream os;
                os << "line " << line_no << ": column '" << header[k + 2]
                   << "' is not a finite number: '" << fields[k + 2] << "'";
                throw DataError(os.str());
            }
        }
        ids.emplace(row.id, 0);
        periods.emplace(row.t, 0);
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw DataError("CSV input has no data rows");

    auto id_tokens = sorted_tokens(ids);
    auto t_tokens = sorted_tokens(periods);
    for (std::size_t k = 0; k < id_tokens.size(); ++k) ids[id_tokens[k]] = static_cast<int>(k);
    for (std::size_t k = 0; k < t_tokens.size(); ++k) periods[t_tokens[k]] = static_cast<int>(k);

    const auto n = static_cast<Eigen::Index>(id_tokens.size());
    const auto t = static_cast<Eigen::Index>(t_tokens.size());
    Eigen::VectorXd y(n * t);
    Eigen::MatrixXd x(n * t, static_cast<Eigen::Index>(d));
    std::vector<char> filled(static_cast<std::size_t>(n * t), 0);

    for (const auto& row : rows) {
        const Eigen::Index r = ids[row.id] * t + periods[row.t];
        if (filled[static_cast<std::size_t>(r)]) {
            throw DataError("duplicate observation for (id,t) = (" + row.id + "," + row.t + ")");
        }
        filled[static_cast<std::size_t>(r)] = 1;
        y(r) = row.values[0];
        for (std::size_t k = 0; k < d; ++k) x(r, static_cast<Eigen::Index>(k)) = row.values[k + 1];
    }

    std::vector<std::string> missing;
    for (Eigen::Index cell = 0; cell < n * t; ++cell) {
        if (!filled[static_cast<std::size_t>(cell)]) {
            missing.push_back("(" + id_tokens[static_cast<std::size_t>(cell / t)] + "," +
                              t_tokens[static_cast<std::size_t>(cell % t)] + ")");
        }
    }
    if (!missing.empty()) {
        constexpr std::size_t shown = 20;
        std::ostringstream os;
        os << "unbalanced panel: " << missing.size() << " missing (id,t) cell"
           << (missing.size() == 1 ? "" : "s") << ":";
        for (std::size_t k = 0; k < std::min(shown, missing.size()); ++k) os << ' ' << missing[k];
        if (missing.size() > shown) os << " ...";
        throw DataError(os.str());
    }

    return LoadedPanel{PanelData(n, t, std::move(y), std::move(x)), std::move(id_tokens),
                       std::move(t_tokens), std::vector<std::string>(header.begin() + 3, header.end())};
}

LoadedPanel read_panel_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open input file '" + path + "'");
    return read_panel_csv(in);
}

}  // namespace qpanel
