#include "desert/data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "desert/error.hpp"

namespace desert {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(field));
            field.clear();
        } else {
            field.push_back(c);
        }
    }
    out.push_back(std::move(field));
    return out;
}

std::string trim(std::string s) {
    const auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

int parse_binary(const std::string& token, const Schema& schema, const std::string& column,
                 std::size_t row) {
    if (std::find(schema.true_tokens.begin(), schema.true_tokens.end(), token) !=
        schema.true_tokens.end())
        return 1;
    if (std::find(schema.false_tokens.begin(), schema.false_tokens.end(), token) !=
        schema.false_tokens.end())
        return 0;
    if (token.empty()) throw ParseError("missing value in column '" + column + "'", row);
    throw ParseError("non-binary value '" + token + "' in column '" + column + "'", row);
}

double parse_real(const std::string& token, const std::string& column, std::size_t row) {
    if (token.empty() || token == "NA" || token == "NaN" || token == "nan")
        throw ParseError("missing value in column '" + column + "'", row);
    double v = 0.0;
    const auto* first = token.data();
    const auto* last = token.data() + token.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || !std::isfinite(v))
        throw ParseError("non-numeric value '" + token + "' in column '" + column + "'", row);
    return v;
}

std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

}  // namespace

std::vector<double> Scaling::apply(const std::vector<double>& raw, bool* clamped) const {
    if (raw.size() != ranges.size())
        throw DimensionError("covariate vector has " + std::to_string(raw.size()) +
                             " entries, scaling expects " + std::to_string(ranges.size()));
    std::vector<double> out(raw.size());
    bool any = false;
    for (std::size_t j = 0; j < raw.size(); ++j) {
        const auto& r = ranges[j];
        double v = (raw[j] - r.min) / (r.max - r.min);
        if (v < 0.0) {
            v = 0.0;
            any = true;
        } else if (v > 1.0) {
            v = 1.0;
            any = true;
        }
        out[j] = v;
    }
    if (clamped) *clamped = any;
    return out;
}

Scaling Scaling::identity(std::size_t d) {
    Scaling s;
    s.ranges.assign(d, CovariateRange{0.0, 1.0});
    return s;
}

Schema Schema::parse(const std::string& spec) {
    Schema schema;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw SchemaError("schema entry '" + item + "' lacks '='");
        const std::string key = trim(item.substr(0, eq));
        const std::string value = trim(item.substr(eq + 1));
        if (key == "s")
            schema.s = value;
        else if (key == "z")
            schema.z = value;
        else if (key == "y")
            schema.y = value;
        else if (key == "x")
            schema.covariates.push_back(value);
        else
            throw SchemaError("unknown schema key '" + key + "'");
    }
    return schema;
}

Dataset::Dataset(std::vector<ObservationRecord> records, std::vector<std::string> covariate_names,
                 Scaling scaling, bool scaled)
    : records_(std::move(records)),
      names_(std::move(covariate_names)),
      scaling_(std::move(scaling)),
      scaled_(scaled) {
    const std::size_t d = names_.size();
    if (scaling_.ranges.size() != d)
        throw DimensionError("scaling has " + std::to_string(scaling_.ranges.size()) +
                             " ranges for " + std::to_string(d) + " covariates");
    for (std::size_t j = 0; j < d; ++j)
        if (!(scaling_.ranges[j].min < scaling_.ranges[j].max))
            throw DegenerateCovariateError(names_[j]);
    for (std::size_t i = 0; i < records_.size(); ++i) {
        const auto& r = records_[i];
        if (r.x.size() != d)
            throw DimensionError("record " + std::to_string(i) + " has " +
                                 std::to_string(r.x.size()) + " covariates, expected " +
                                 std::to_string(d));
        if ((r.s != 0 && r.s != 1) || (r.z != 0 && r.z != 1) || (r.y != 0 && r.y != 1))
            throw InvalidArgument("record " + std::to_string(i) + " has a non-binary s, z or y");
    }
}

Eigen::MatrixXd Dataset::covariates() const {
    Eigen::MatrixXd x(records_.size(), names_.size());
    for (std::size_t i = 0; i < records_.size(); ++i)
        for (std::size_t j = 0; j < names_.size(); ++j) x(i, j) = records_[i].x[j];
    return x;
}

Eigen::VectorXd Dataset::outcomes() const {
    Eigen::VectorXd y(records_.size());
    for (std::size_t i = 0; i < records_.size(); ++i) y(i) = records_[i].y;
    return y;
}

Dataset Dataset::subset(const std::vector<std::size_t>& rows) const {
    std::vector<ObservationRecord> picked;
    picked.reserve(rows.size());
    for (auto i : rows) picked.push_back(records_.at(i));
    Dataset out(std::move(picked), names_, scaling_, scaled_);
    out.schema = schema;
    return out;
}

Dataset load_csv(const std::filesystem::path& path, const Schema& schema, bool fit_scaling) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path.string() + "'");

    std::string line;
    if (!std::getline(in, line)) throw EmptyDataError("'" + path.string() + "' is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    // Strip a UTF-8 byte order mark.
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    std::vector<std::string> header = split_csv_line(line);
    for (auto& h : header) h = trim(h);

    const auto column_of = [&](const std::string& name) -> std::size_t {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw SchemaError("column '" + name + "' not found in header");
        return static_cast<std::size_t>(it - header.begin());
    };
    constexpr std::size_t none = static_cast<std::size_t>(-1);
    const std::size_t s_col = schema.s.empty() ? none : column_of(schema.s);
    const std::size_t z_col = column_of(schema.z);
    const std::size_t y_col = schema.y.empty() ? none : column_of(schema.y);

    std::vector<std::string> names = schema.covariates;
    if (names.empty()) {
        for (std::size_t j = 0; j < header.size(); ++j)
            if (j != s_col && j != z_col && j != y_col) names.push_back(header[j]);
    }
    std::vector<std::size_t> x_cols;
    for (const auto& name : names) x_cols.push_back(column_of(name));

    std::vector<ObservationRecord> records;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        ++row;
        auto fields = split_csv_line(line);
        if (fields.size() != header.size())
            throw ParseError("expected " + std::to_string(header.size()) + " fields, found " +
                                 std::to_string(fields.size()),
                             row);
        for (auto& f : fields) f = trim(f);
        ObservationRecord r;
        r.s = s_col == none ? 0 : parse_binary(fields[s_col], schema, schema.s, row);
        r.z = parse_binary(fields[z_col], schema, schema.z, row);
        r.y = y_col == none ? 0 : parse_binary(fields[y_col], schema, schema.y, row);
        r.x.reserve(x_cols.size());
        for (std::size_t k = 0; k < x_cols.size(); ++k)
            r.x.push_back(parse_real(fields[x_cols[k]], names[k], row));
        records.push_back(std::move(r));
    }
    if (records.empty()) throw EmptyDataError("'" + path.string() + "' has no data rows");

    Scaling scaling = Scaling::identity(names.size());
    for (std::size_t j = 0; fit_scaling && j < names.size(); ++j) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (const auto& r : records) {
            lo = std::min(lo, r.x[j]);
            hi = std::max(hi, r.x[j]);
        }
        if (!(lo < hi)) throw DegenerateCovariateError(names[j]);
        scaling.ranges[j] = {lo, hi};
    }

    Dataset data(std::move(records), std::move(names), std::move(scaling), false);
    data.schema = schema;
    data.schema.covariates = data.covariate_names();
    return data;
}

void write_csv(const std::filesystem::path& path, const Dataset& data) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << data.schema.s << ',' << data.schema.z << ',' << data.schema.y;
    for (const auto& n : data.covariate_names()) out << ',' << n;
    out << '\n';
    for (const auto& r : data.records()) {
        out << r.s << ',' << r.z << ',' << r.y;
        for (double v : r.x) out << ',' << format_double(v);
        out << '\n';
    }
}

Dataset scale_covariates(const Dataset& raw) {
    if (raw.scaled()) return raw;
    std::vector<ObservationRecord> records = raw.records();
    for (auto& r : records) r.x = raw.scaling().apply(r.x);
    Dataset out(std::move(records), raw.covariate_names(), raw.scaling(), true);
    out.schema = raw.schema;
    return out;
}

StratumCounts stratum_counts(const Dataset& data) {
    StratumCounts counts{};
    for (const auto& r : data.records()) ++counts[r.s][r.z];
    return counts;
}

void require_positivity(const Dataset& data) {
    const auto counts = stratum_counts(data);
    for (int s = 0; s < 2; ++s)
        for (int z = 0; z < 2; ++z)
            if (counts[s][z] == 0)
                throw PositivityError("stratum (s=" + std::to_string(s) + ", z=" +
                                      std::to_string(z) + ") has no observations");
}

}  // namespace desert
