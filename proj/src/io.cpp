#include "jointmodel/io.h"

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "jointmodel/errors.h"

namespace jointmodel
{

using nlohmann::json;

std::vector<std::string> split(std::string_view line, char delim)
{
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;)
    {
        const std::size_t pos = line.find(delim, start);
        if (pos == std::string_view::npos)
        {
            out.emplace_back(line.substr(start));
            return out;
        }
        out.emplace_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

std::string trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos)
    {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

std::string format_double(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace
{

bool try_parse_number(std::string_view text, double& out)
{
    const std::string s = trim(text);
    if (s.empty())
    {
        return false;
    }
    char* end = nullptr;
    errno = 0;
    out = std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size() && errno != ERANGE && std::isfinite(out);
}

}  // namespace

double parse_number(std::string_view text, const std::string& source, std::size_t line)
{
    double v = 0.0;
    if (!try_parse_number(text, v))
    {
        throw IngestionError(
            source + ":" + std::to_string(line) + ": non-numeric value '" + trim(text) + "'");
    }
    return v;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content)
{
    if (path.has_parent_path())
    {
        std::filesystem::create_directories(path.parent_path());
    }
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
        {
            throw Error("cannot write " + tmp.string());
        }
        out << content;
        out.flush();
        if (!out)
        {
            throw Error("write failed for " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

namespace
{

struct Table
{
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;
};

Table read_csv(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
    {
        throw IngestionError("cannot open " + path.string());
    }
    Table table;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line))
    {
        ++line_no;
        if (trim(line).empty())
        {
            continue;
        }
        auto fields = split(line, ',');
        for (auto& f : fields)
        {
            f = trim(f);
        }
        if (table.header.empty())
        {
            table.header = std::move(fields);
            continue;
        }
        table.rows.push_back(std::move(fields));
        table.line_numbers.push_back(line_no);
    }
    if (table.header.empty())
    {
        throw IngestionError(path.string() + ": missing header row");
    }
    return table;
}

std::size_t column(const Table& t, const std::string& name, const std::filesystem::path& path)
{
    const auto it = std::find(t.header.begin(), t.header.end(), name);
    if (it == t.header.end())
    {
        throw IngestionError(path.string() + ": missing column '" + name + "'");
    }
    return static_cast<std::size_t>(it - t.header.begin());
}

}  // namespace

std::vector<Individual> load_dataset(
    const std::filesystem::path& longitudinal,
    const std::filesystem::path& outcomes,
    const LoadOptions& options,
    std::vector<std::string>* warnings)
{
    auto reject = [&](const std::string& message) {
        if (!options.skip_bad_rows)
        {
            throw IngestionError(message);
        }
        if (warnings)
        {
            warnings->push_back("skipped " + message);
        }
    };

    const Table long_table = read_csv(longitudinal);
    const std::size_t c_id = column(long_table, "id", longitudinal);
    const std::size_t c_time = column(long_table, "time", longitudinal);
    const std::size_t c_y = column(long_table, "y", longitudinal);

    std::map<std::string, std::vector<std::pair<double, double>>> series;
    std::map<std::pair<std::string, double>, std::size_t> seen;
    for (std::size_t r = 0; r < long_table.rows.size(); ++r)
    {
        const auto& row = long_table.rows[r];
        const std::size_t line = long_table.line_numbers[r];
        const std::string where = longitudinal.string() + ":" + std::to_string(line);
        if (row.size() != long_table.header.size())
        {
            reject(where + ": expected " + std::to_string(long_table.header.size()) + " fields");
            continue;
        }
        double t = 0.0;
        double y = 0.0;
        if (row[c_id].empty())
        {
            reject(where + ": empty id");
            continue;
        }
        if (!try_parse_number(row[c_time], t) || !try_parse_number(row[c_y], y))
        {
            reject(where + ": non-numeric time or y");
            continue;
        }
        const auto key = std::make_pair(row[c_id], t);
        if (const auto it = seen.find(key); it != seen.end())
        {
            throw IngestionError(
                where + ": duplicate observation for id '" + row[c_id] + "' at time "
                + format_double(t) + " (first seen on line " + std::to_string(it->second) + ")");
        }
        seen.emplace(key, line);
        series[row[c_id]].emplace_back(t, y);
    }

    const Table out_table = read_csv(outcomes);
    const std::size_t o_id = column(out_table, "id", outcomes);
    const std::size_t o_d = column(out_table, "d", outcomes);
    std::vector<std::size_t> cov_cols;
    for (std::size_t c = 0; c < out_table.header.size(); ++c)
    {
        if (c != o_id && c != o_d)
        {
            cov_cols.push_back(c);
        }
    }

    struct OutcomeRecord
    {
        double d = 0.0;
        std::vector<double> w;
        std::size_t line = 0;
    };
    std::map<std::string, OutcomeRecord> outcome_rows;
    for (std::size_t r = 0; r < out_table.rows.size(); ++r)
    {
        const auto& row = out_table.rows[r];
        const std::size_t line = out_table.line_numbers[r];
        const std::string where = outcomes.string() + ":" + std::to_string(line);
        if (row.size() != out_table.header.size())
        {
            reject(where + ": expected " + std::to_string(out_table.header.size()) + " fields");
            continue;
        }
        OutcomeRecord rec;
        rec.line = line;
        bool ok = try_parse_number(row[o_d], rec.d);
        for (std::size_t c : cov_cols)
        {
            double w = 0.0;
            ok = ok && try_parse_number(row[c], w);
            rec.w.push_back(w);
        }
        if (row[o_id].empty() || !ok)
        {
            reject(where + ": empty id or non-numeric outcome/covariate");
            continue;
        }
        if (outcome_rows.count(row[o_id]))
        {
            throw IngestionError(where + ": duplicate outcome row for id '" + row[o_id] + "'");
        }
        outcome_rows.emplace(row[o_id], std::move(rec));
    }

    for (const auto& [id, rec] : outcome_rows)
    {
        if (!series.count(id))
        {
            throw IngestionError(
                outcomes.string() + ":" + std::to_string(rec.line) + ": orphan id '" + id
                + "' has no longitudinal rows");
        }
    }
    for (const auto& [id, obs] : series)
    {
        if (!outcome_rows.count(id))
        {
            throw IngestionError(
                longitudinal.string() + ": orphan id '" + id + "' has no outcome row");
        }
    }

    bool has_intercept = !cov_cols.empty();
    for (const auto& [id, rec] : outcome_rows)
    {
        has_intercept = has_intercept && rec.w.front() == 1.0;
    }

    std::vector<Individual> data;
    data.reserve(series.size());
    for (auto& [id, obs] : series)
    {
        std::sort(obs.begin(), obs.end());
        Individual ind;
        ind.id = id;
        ind.times.resize(static_cast<Eigen::Index>(obs.size()));
        ind.y.resize(static_cast<Eigen::Index>(obs.size()));
        for (std::size_t j = 0; j < obs.size(); ++j)
        {
            ind.times[static_cast<Eigen::Index>(j)] = obs[j].first;
            ind.y[static_cast<Eigen::Index>(j)] = obs[j].second;
        }
        const auto& rec = outcome_rows.at(id);
        ind.outcome = rec.d;
        const std::size_t offset = has_intercept ? 0 : 1;
        ind.covariates.resize(static_cast<Eigen::Index>(rec.w.size() + offset));
        if (!has_intercept)
        {
            ind.covariates[0] = 1.0;
        }
        for (std::size_t c = 0; c < rec.w.size(); ++c)
        {
            ind.covariates[static_cast<Eigen::Index>(c + offset)] = rec.w[c];
        }
        validate(ind);
        data.push_back(std::move(ind));
    }
    return data;
}

void write_dataset(
    std::span<const Individual> data,
    const std::filesystem::path& longitudinal,
    const std::filesystem::path& outcomes)
{
    std::ostringstream lon;
    lon << "id,time,y\n";
    std::ostringstream out;
    out << "id,d";
    const Eigen::Index k = data.empty() ? 1 : data.front().covariates.size();
    for (Eigen::Index c = 0; c < k; ++c)
    {
        out << ",w" << c + 1;
    }
    out << '\n';
    for (const auto& ind : data)
    {
        for (Eigen::Index j = 0; j < ind.n_obs(); ++j)
        {
            lon << ind.id << ',' << format_double(ind.times[j]) << ',' << format_double(ind.y[j]) << '\n';
        }
        out << ind.id << ',' << format_double(ind.outcome);
        for (Eigen::Index c = 0; c < ind.covariates.size(); ++c)
        {
            out << ',' << format_double(ind.covariates[c]);
        }
        out << '\n';
    }
    write_file_atomic(longitudinal, lon.str());
    write_file_atomic(outcomes, out.str());
}

namespace
{

std::vector<double> parse_list(const std::string& key, const std::string& value)
{
    std::vector<double> out;
    for (const auto& part : split(value, ','))
    {
        double v = 0.0;
        if (!try_parse_number(part, v))
        {
            throw ConfigError("key '" + key + "': non-numeric entry '" + trim(part) + "'");
        }
        out.push_back(v);
    }
    return out;
}

VectorXd parse_vector(const std::string& key, const std::string& value)
{
    const auto list = parse_list(key, value);
    return Eigen::Map<const VectorXd>(list.data(), static_cast<Eigen::Index>(list.size()));
}

// "diag:c" and a bare scalar give c * I (sized when the model is known);
// "diag:a,b,..." a diagonal matrix; n^2 entries a row-major square matrix.
MatrixXd parse_matrix(const std::string& key, const std::string& value)
{
    if (value.rfind("diag:", 0) == 0)
    {
        const auto list = parse_list(key, value.substr(5));
        if (list.size() == 1)
        {
            return MatrixXd::Constant(1, 1, list[0]);
        }
        const VectorXd d = Eigen::Map<const VectorXd>(list.data(), static_cast<Eigen::Index>(list.size()));
        return d.asDiagonal();
    }
    const auto list = parse_list(key, value);
    const auto n = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(list.size()))));
    if (static_cast<std::size_t>(n * n) != list.size())
    {
        throw ConfigError("key '" + key + "': matrix needs a square number of entries");
    }
    MatrixXd m(n, n);
    for (Eigen::Index a = 0; a < n; ++a)
    {
        for (Eigen::Index b = 0; b < n; ++b)
        {
            m(a, b) = list[static_cast<std::size_t>(a * n + b)];
        }
    }
    return m;
}

double parse_scalar(const std::string& key, const std::string& value)
{
    double v = 0.0;
    if (!try_parse_number(value, v))
    {
        throw ConfigError("key '" + key + "': expected a number, got '" + value + "'");
    }
    return v;
}

std::int64_t parse_integer(const std::string& key, const std::string& value)
{
    std::int64_t v = 0;
    const auto* begin = value.data();
    const auto* end = value.data() + value.size();
    const auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || ptr != end)
    {
        throw ConfigError("key '" + key + "': expected an integer, got '" + value + "'");
    }
    return v;
}

}  // namespace

FitConfig parse_config_text(std::string_view text)
{
    FitConfig config;
    std::set<std::string> seen;
    double v1 = 3.0;
    double v2 = 0.01;
    double r1 = 3.0;
    double r2 = 0.01;
    bool ig_scale = false;
    std::size_t line_no = 0;
    for (const auto& raw : split(text, '\n'))
    {
        ++line_no;
        std::string line = raw;
        if (const auto hash = line.find('#'); hash != std::string::npos)
        {
            line.erase(hash);
        }
        line = trim(line);
        if (line.empty())
        {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
        {
            throw ConfigError("line " + std::to_string(line_no) + ": expected key=value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (!seen.insert(key).second)
        {
            throw ConfigError("key '" + key + "' given twice");
        }
        auto& h = config.hyper;
        if (key == "iterations")
        {
            config.iterations = parse_integer(key, value);
        }
        else if (key == "burn_in")
        {
            config.burn_in = parse_integer(key, value);
        }
        else if (key == "thin")
        {
            config.thin = parse_integer(key, value);
        }
        else if (key == "seed")
        {
            config.seed = static_cast<std::uint64_t>(parse_integer(key, value));
        }
        else if (key == "threads")
        {
            config.threads = static_cast<int>(parse_integer(key, value));
        }
        else if (key == "proposal_refresh")
        {
            config.proposal_refresh = static_cast<int>(parse_integer(key, value));
        }
        else if (key == "prior_only")
        {
            if (value != "true" && value != "false")
            {
                throw ConfigError("key 'prior_only': expected true or false, got '" + value + "'");
            }
            config.prior_only = value == "true";
        }
        else if (key == "error_model")
        {
            config.error_model = parse_error_model(value);
        }
        else if (key == "family")
        {
            config.family = parse_family(value);
        }
        else if (key == "a1")
        {
            h.a1 = parse_vector(key, value);
        }
        else if (key == "A")
        {
            h.A = parse_matrix(key, value);
        }
        else if (key == "c1")
        {
            h.c1 = parse_vector(key, value);
        }
        else if (key == "C")
        {
            h.C = parse_matrix(key, value);
        }
        else if (key == "v")
        {
            h.v = parse_scalar(key, value);
        }
        else if (key == "V")
        {
            h.V = parse_matrix(key, value);
        }
        else if (key == "v1")
        {
            v1 = parse_scalar(key, value);
        }
        else if (key == "v2")
        {
            v2 = parse_scalar(key, value);
        }
        else if (key == "s")
        {
            h.s = parse_vector(key, value);
        }
        else if (key == "S")
        {
            h.S = parse_matrix(key, value);
        }
        else if (key == "r1")
        {
            r1 = parse_scalar(key, value);
        }
        else if (key == "r2")
        {
            r2 = parse_scalar(key, value);
        }
        else if (key == "ig_convention")
        {
            if (value != "rate" && value != "scale")
            {
                throw ConfigError("key 'ig_convention': expected rate or scale, got '" + value + "'");
            }
            ig_scale = value == "scale";
        }
        else if (key == "rho_lower")
        {
            h.rho_lower = parse_scalar(key, value);
        }
        else if (key == "rho_upper")
        {
            h.rho_upper = parse_scalar(key, value);
        }
        else
        {
            throw ConfigError("unknown key '" + key + "'");
        }
    }
    if (!(v1 > 0.0))
    {
        throw ConfigError("key 'v1' must be positive");
    }
    if (!(v2 > 0.0))
    {
        throw ConfigError("key 'v2' must be positive");
    }
    if (!(r1 > 0.0))
    {
        throw ConfigError("key 'r1' must be positive");
    }
    if (!(r2 > 0.0))
    {
        throw ConfigError("key 'r2' must be positive");
    }
    if (ig_scale)
    {
        config.hyper.sigma2_eps_prior = inverse_gamma_from_scale(v1, v2);
        config.hyper.phi_prior = inverse_gamma_from_scale(r1, r2);
    }
    else
    {
        config.hyper.sigma2_eps_prior = {v1, v2};
        config.hyper.phi_prior = {r1, r2};
    }
    if (!(config.hyper.v > 0.0))
    {
        throw ConfigError("key 'v' must be positive");
    }
    if (!(config.hyper.rho_lower >= 0.0 && config.hyper.rho_upper <= 1.0
          && config.hyper.rho_lower < config.hyper.rho_upper))
    {
        throw ConfigError("keys 'rho_lower', 'rho_upper' must satisfy 0 <= lower < upper <= 1");
    }
    config.validate();
    return config;
}

FitConfig parse_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
    {
        throw ConfigError("cannot open config file " + path.string());
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

std::filesystem::path chain_x_path(const std::filesystem::path& chain_path)
{
    std::filesystem::path p = chain_path;
    p.replace_extension(".x.csv");
    return p;
}

std::filesystem::path chain_meta_path(const std::filesystem::path& chain_path)
{
    std::filesystem::path p = chain_path;
    p.replace_extension(".meta.json");
    return p;
}

namespace
{

json to_json(const VectorXd& v)
{
    return std::vector<double>(v.data(), v.data() + v.size());
}

json to_json(const MatrixXd& m)
{
    json rows = json::array();
    for (Eigen::Index a = 0; a < m.rows(); ++a)
    {
        rows.push_back(to_json(VectorXd(m.row(a).transpose())));
    }
    return rows;
}

VectorXd vector_from_json(const json& j)
{
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

MatrixXd matrix_from_json(const json& j)
{
    const auto n = static_cast<Eigen::Index>(j.size());
    MatrixXd m(n, n == 0 ? 0 : static_cast<Eigen::Index>(j[0].size()));
    for (Eigen::Index a = 0; a < n; ++a)
    {
        m.row(a) = vector_from_json(j[static_cast<std::size_t>(a)]).transpose();
    }
    return m;
}

json config_to_json(const FitConfig& c)
{
    const auto& h = c.hyper;
    return json{
        {"iterations", c.iterations},
        {"burn_in", c.burn_in},
        {"thin", c.thin},
        {"seed", c.seed},
        {"error_model", std::string(to_string(c.error_model))},
        {"family", std::string(to_string(c.family))},
        {"threads", c.threads},
        {"proposal_refresh", c.proposal_refresh},
        {"prior_only", c.prior_only},
        {"hyper",
         {{"a1", to_json(h.a1)},
          {"A", to_json(h.A)},
          {"c1", to_json(h.c1)},
          {"C", to_json(h.C)},
          {"v", h.v},
          {"V", to_json(h.V)},
          {"sigma2_eps_shape", h.sigma2_eps_prior.shape},
          {"sigma2_eps_rate", h.sigma2_eps_prior.rate},
          {"s", to_json(h.s)},
          {"S", to_json(h.S)},
          {"phi_shape", h.phi_prior.shape},
          {"phi_rate", h.phi_prior.rate},
          {"rho_lower", h.rho_lower},
          {"rho_upper", h.rho_upper}}},
    };
}

FitConfig config_from_json(const json& j)
{
    FitConfig c;
    c.iterations = j.at("iterations").get<std::int64_t>();
    c.burn_in = j.at("burn_in").get<std::int64_t>();
    c.thin = j.at("thin").get<std::int64_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.error_model = parse_error_model(j.at("error_model").get<std::string>());
    c.family = parse_family(j.at("family").get<std::string>());
    c.threads = j.value("threads", 1);
    c.proposal_refresh = j.value("proposal_refresh", 10);
    c.prior_only = j.value("prior_only", false);
    const auto& h = j.at("hyper");
    c.hyper.a1 = vector_from_json(h.at("a1"));
    c.hyper.A = matrix_from_json(h.at("A"));
    c.hyper.c1 = vector_from_json(h.at("c1"));
    c.hyper.C = matrix_from_json(h.at("C"));
    c.hyper.v = h.at("v").get<double>();
    c.hyper.V = matrix_from_json(h.at("V"));
    c.hyper.sigma2_eps_prior = {h.at("sigma2_eps_shape").get<double>(), h.at("sigma2_eps_rate").get<double>()};
    c.hyper.s = vector_from_json(h.at("s"));
    c.hyper.S = matrix_from_json(h.at("S"));
    c.hyper.phi_prior = {h.at("phi_shape").get<double>(), h.at("phi_rate").get<double>()};
    c.hyper.rho_lower = h.at("rho_lower").get<double>();
    c.hyper.rho_upper = h.at("rho_upper").get<double>();
    return c;
}

std::vector<std::string> chain_columns(Eigen::Index p, Eigen::Index r, Eigen::Index q)
{
    std::vector<std::string> cols{"iteration"};
    for (Eigen::Index j = 0; j < p; ++j)
    {
        cols.push_back("alpha[" + std::to_string(j + 1) + "]");
    }
    for (Eigen::Index j = 0; j < r; ++j)
    {
        cols.push_back("beta[" + std::to_string(j + 1) + "]");
    }
    for (Eigen::Index j = 0; j < q; ++j)
    {
        cols.push_back("mu_x[" + std::to_string(j + 1) + "]");
    }
    for (Eigen::Index a = 0; a < q; ++a)
    {
        for (Eigen::Index b = a; b < q; ++b)
        {
            cols.push_back("sigma_x[" + std::to_string(a + 1) + ";" + std::to_string(b + 1) + "]");
        }
    }
    cols.insert(cols.end(), {"sigma2_eps", "rho", "phi"});
    return cols;
}

Eigen::Index count_prefix(const std::vector<std::string>& cols, const std::string& prefix)
{
    return std::count_if(cols.begin(), cols.end(), [&](const std::string& c) {
        return c.rfind(prefix, 0) == 0;
    });
}

std::string join(const std::vector<std::string>& cols)
{
    std::string out;
    for (std::size_t k = 0; k < cols.size(); ++k)
    {
        out += (k ? "," : "") + cols[k];
    }
    return out;
}

}  // namespace

void persist_chain(const ChainStore& store, const std::filesystem::path& path)
{
    if (store.draws.empty())
    {
        throw FormatError("cannot persist an empty chain");
    }
    const auto& first = store.draws.front();
    const Eigen::Index p = first.alpha.size();
    const Eigen::Index r = first.beta.size();
    const Eigen::Index q = first.mu_x.size();

    std::string main = join(chain_columns(p, r, q)) + "\n";
    std::string xs = "iteration";
    for (const auto& id : store.meta.ids)
    {
        if (q == 1)
        {
            xs += "," + id;
        }
        else
        {
            for (Eigen::Index j = 0; j < q; ++j)
            {
                xs += "," + id + "[" + std::to_string(j + 1) + "]";
            }
        }
    }
    xs += "\n";

    for (std::size_t k = 0; k < store.draws.size(); ++k)
    {
        const auto& d = store.draws[k];
        std::string row = std::to_string(store.iterations[k]);
        auto put = [&row](double v) {
            row += ',';
            row += format_double(v);
        };
        for (Eigen::Index j = 0; j < p; ++j)
        {
            put(d.alpha[j]);
        }
        for (Eigen::Index j = 0; j < r; ++j)
        {
            put(d.beta[j]);
        }
        for (Eigen::Index j = 0; j < q; ++j)
        {
            put(d.mu_x[j]);
        }
        for (Eigen::Index a = 0; a < q; ++a)
        {
            for (Eigen::Index b = a; b < q; ++b)
            {
                put(d.sigma_x(a, b));
            }
        }
        put(d.sigma2_eps);
        put(d.rho);
        put(d.phi);
        main += row + "\n";

        std::string xrow = std::to_string(store.iterations[k]);
        for (const auto& xi : d.x)
        {
            for (Eigen::Index j = 0; j < xi.size(); ++j)
            {
                xrow += ',';
                xrow += format_double(xi[j]);
            }
        }
        xs += xrow + "\n";
    }

    json meta;
    meta["config"] = config_to_json(store.meta.config);
    meta["ids"] = store.meta.ids;
    meta["retained"] = store.draws.size();
    json acc = json::object();
    for (const auto& [block, tally] : store.meta.acceptance)
    {
        acc[block] = {{"proposed", tally.proposed}, {"accepted", tally.accepted}, {"rate", tally.rate()}};
    }
    meta["acceptance"] = acc;

    write_file_atomic(path, main);
    write_file_atomic(chain_x_path(path), xs);
    write_file_atomic(chain_meta_path(path), meta.dump(2) + "\n");
}

namespace
{

std::vector<std::vector<double>> read_numeric_rows(
    const std::filesystem::path& path,
    std::vector<std::string>& header)
{
    std::ifstream in(path);
    if (!in)
    {
        throw FormatError("cannot open " + path.string());
    }
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line))
    {
        ++line_no;
        if (line.empty())
        {
            continue;
        }
        auto fields = split(line, ',');
        if (header.empty())
        {
            header = std::move(fields);
            continue;
        }
        if (fields.size() != header.size())
        {
            throw FormatError(
                path.string() + ":" + std::to_string(line_no) + ": expected "
                + std::to_string(header.size()) + " columns, found " + std::to_string(fields.size()));
        }
        std::vector<double> row(fields.size());
        for (std::size_t c = 0; c < fields.size(); ++c)
        {
            if (!try_parse_number(fields[c], row[c]))
            {
                throw FormatError(
                    path.string() + ":" + std::to_string(line_no) + ": bad value in column "
                    + header[c]);
            }
        }
        rows.push_back(std::move(row));
    }
    if (header.empty())
    {
        throw FormatError(path.string() + ": missing header");
    }
    return rows;
}

}  // namespace

ChainStore load_chain(const std::filesystem::path& path)
{
    std::vector<std::string> header;
    const auto rows = read_numeric_rows(path, header);
    const Eigen::Index p = count_prefix(header, "alpha[");
    const Eigen::Index r = count_prefix(header, "beta[");
    const Eigen::Index q = count_prefix(header, "mu_x[");
    if (header != chain_columns(p, r, q))
    {
        throw FormatError(path.string() + ": unexpected column layout");
    }

    std::vector<std::string> x_header;
    const auto x_rows = read_numeric_rows(chain_x_path(path), x_header);
    if (x_rows.size() != rows.size())
    {
        throw FormatError(
            chain_x_path(path).string() + ": " + std::to_string(x_rows.size())
            + " rows, chain has " + std::to_string(rows.size()));
    }
    if (q == 0 || (x_header.size() - 1) % static_cast<std::size_t>(q) != 0)
    {
        throw FormatError(chain_x_path(path).string() + ": column count is not a multiple of q");
    }
    const std::size_t m = (x_header.size() - 1) / static_cast<std::size_t>(q);

    ChainStore store;
    const auto meta_file = chain_meta_path(path);
    if (std::filesystem::exists(meta_file))
    {
        std::ifstream in(meta_file);
        try
        {
            const json meta = json::parse(in);
            store.meta.config = config_from_json(meta.at("config"));
            store.meta.ids = meta.at("ids").get<std::vector<std::string>>();
            for (const auto& [block, tally] : meta.at("acceptance").items())
            {
                store.meta.acceptance[block]
                    = {tally.at("proposed").get<std::int64_t>(), tally.at("accepted").get<std::int64_t>()};
            }
        }
        catch (const json::exception& e)
        {
            throw FormatError(meta_file.string() + ": " + e.what());
        }
        if (store.meta.ids.size() != m)
        {
            throw FormatError(meta_file.string() + ": id count does not match the random effects file");
        }
    }
    else
    {
        for (std::size_t i = 0; i < m; ++i)
        {
            store.meta.ids.push_back(q == 1 ? x_header[i + 1] : "ind" + std::to_string(i + 1));
        }
    }

    for (std::size_t k = 0; k < rows.size(); ++k)
    {
        const auto& row = rows[k];
        if (x_rows[k][0] != row[0])
        {
            throw FormatError(chain_x_path(path).string() + ": iteration column does not match the chain");
        }
        ParameterState d;
        std::size_t c = 1;
        d.alpha.resize(p);
        for (Eigen::Index j = 0; j < p; ++j)
        {
            d.alpha[j] = row[c++];
        }
        d.beta.resize(r);
        for (Eigen::Index j = 0; j < r; ++j)
        {
            d.beta[j] = row[c++];
        }
        d.mu_x.resize(q);
        for (Eigen::Index j = 0; j < q; ++j)
        {
            d.mu_x[j] = row[c++];
        }
        d.sigma_x.resize(q, q);
        for (Eigen::Index a = 0; a < q; ++a)
        {
            for (Eigen::Index b = a; b < q; ++b)
            {
                d.sigma_x(a, b) = row[c];
                d.sigma_x(b, a) = row[c++];
            }
        }
        d.sigma2_eps = row[c++];
        d.rho = row[c++];
        d.phi = row[c++];
        d.x.resize(m);
        for (std::size_t i = 0; i < m; ++i)
        {
            d.x[i] = Eigen::Map<const VectorXd>(&x_rows[k][1 + i * static_cast<std::size_t>(q)], q);
        }
        store.iterations.push_back(static_cast<std::int64_t>(row[0]));
        store.draws.push_back(std::move(d));
    }
    return store;
}

}  // namespace jointmodel
