#include "fasm/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "fasm/rng.hpp"

namespace fasm {

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        if (!cell.empty() && cell.back() == '\r') cell.pop_back();
        out.push_back(cell);
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

bool parse_real(const std::string& s, double& out) {
    if (s.empty()) return false;
    char* end = nullptr;
    out = std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size() && std::isfinite(out);
}

bool missing_cell(const std::string& s) {
    return s.empty() || s == "NA" || s == "NaN" || s == "nan";
}

double quantile(std::vector<double> v, double q) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const double h = (static_cast<double>(v.size()) - 1.0) * q;
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

std::vector<std::string> present_levels(const std::vector<Subject>& subjects,
                                        const std::vector<std::string>& parent_levels) {
    std::vector<std::string> out;
    for (const auto& lvl : parent_levels) {
        for (const auto& s : subjects) {
            if (s.group == lvl) {
                out.push_back(lvl);
                break;
            }
        }
    }
    return out;
}

}  // namespace

std::size_t SurvivalDataset::n_events() const {
    std::size_t n = 0;
    for (const auto& s : subjects)
        if (s.event) ++n;
    return n;
}

int SurvivalDataset::variable_index(const std::string& name) const {
    auto it = std::find(variable_names.begin(), variable_names.end(), name);
    if (it == variable_names.end()) return -1;
    return static_cast<int>(it - variable_names.begin());
}

int SurvivalDataset::group_index(const std::string& level) const {
    auto it = std::find(group_levels.begin(), group_levels.end(), level);
    if (it == group_levels.end()) return -1;
    return static_cast<int>(it - group_levels.begin());
}

void SurvivalDataset::validate() const {
    for (std::size_t i = 0; i < subjects.size(); ++i) {
        const auto& s = subjects[i];
        if (!(s.time > 0.0) || !std::isfinite(s.time))
            throw DataError("subject " + std::to_string(i) + ": time must be positive and finite");
        if (s.covariates.size() != variable_names.size())
            throw DataError("subject " + std::to_string(i) + ": covariate width mismatch");
        if (group_index(s.group) < 0)
            throw DataError("subject " + std::to_string(i) + ": group label '" + s.group +
                            "' not in group_levels");
    }
    for (const auto& lvl : group_levels) {
        bool seen = false;
        for (const auto& s : subjects)
            if (s.group == lvl) { seen = true; break; }
        if (!seen) throw DataError("group level '" + lvl + "' has no subjects");
    }
}

SurvivalDataset load_csv(const std::string& path, const ColumnSchema& schema) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);

    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ": empty file");
    const auto header = split_line(line);

    auto column_of = [&](const std::string& name) {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end())
            throw SchemaError(path + ": missing column '" + name + "'");
        return static_cast<std::size_t>(it - header.begin());
    };

    const std::size_t time_col = column_of(schema.time_column);
    const std::size_t event_col = column_of(schema.event_column);
    const std::size_t group_col = column_of(schema.group_column);
    std::vector<std::size_t> cov_cols;
    for (const auto& c : schema.covariate_columns) cov_cols.push_back(column_of(c));

    std::vector<std::vector<std::string>> rows;
    std::size_t row_index = 0;
    while (std::getline(in, line)) {
        ++row_index;
        if (line.empty()) continue;
        auto cells = split_line(line);
        if (cells.size() != header.size())
            throw ParseError(path + ": row " + std::to_string(row_index) + " has " +
                             std::to_string(cells.size()) + " cells, expected " +
                             std::to_string(header.size()));
        rows.push_back(std::move(cells));
    }

    // A covariate column is numeric if every cell parses; otherwise it is
    // categorical and expands to 0/1 indicators with the lexicographically
    // first level as reference.
    const std::size_t p_raw = cov_cols.size();
    std::vector<bool> numeric(p_raw, true);
    std::vector<std::set<std::string>> levels(p_raw);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < p_raw; ++c) {
            const std::string& cell = rows[r][cov_cols[c]];
            if (missing_cell(cell))
                throw ParseError(path + ": row " + std::to_string(r + 1) +
                                 ": missing value in column '" + schema.covariate_columns[c] + "'");
            double v;
            if (!parse_real(cell, v)) numeric[c] = false;
        }
    }
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < p_raw; ++c)
            if (!numeric[c]) levels[c].insert(rows[r][cov_cols[c]]);

    SurvivalDataset ds;
    std::vector<std::vector<std::string>> indicator_levels(p_raw);
    for (std::size_t c = 0; c < p_raw; ++c) {
        if (numeric[c]) {
            ds.variable_names.push_back(schema.covariate_columns[c]);
        } else {
            bool first = true;  // reference level is skipped
            for (const auto& lvl : levels[c]) {
                if (first) { first = false; continue; }
                ds.variable_names.push_back(schema.covariate_columns[c] + "=" + lvl);
                indicator_levels[c].push_back(lvl);
            }
        }
    }

    std::set<std::string> seen_groups;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto& cells = rows[r];
        Subject s;
        const std::string& tcell = cells[time_col];
        double t;
        if (missing_cell(tcell) || !parse_real(tcell, t) || t <= 0.0)
            throw ParseError(path + ": row " + std::to_string(r + 1) +
                             ": time must be a positive real, got '" + tcell + "'");
        s.time = t;
        const std::string& ecell = cells[event_col];
        if (ecell == "0") s.event = false;
        else if (ecell == "1") s.event = true;
        else
            throw ParseError(path + ": row " + std::to_string(r + 1) +
                             ": event must be 0 or 1, got '" + ecell + "'");
        if (missing_cell(cells[group_col]))
            throw ParseError(path + ": row " + std::to_string(r + 1) + ": missing group");
        s.group = cells[group_col];
        if (seen_groups.insert(s.group).second) ds.group_levels.push_back(s.group);

        for (std::size_t c = 0; c < p_raw; ++c) {
            const std::string& cell = cells[cov_cols[c]];
            if (numeric[c]) {
                double v;
                if (!parse_real(cell, v))
                    throw ParseError(path + ": row " + std::to_string(r + 1) +
                                     ": non-numeric value '" + cell + "' in column '" +
                                     schema.covariate_columns[c] + "'");
                s.covariates.push_back(v);
            } else {
                for (const auto& lvl : indicator_levels[c])
                    s.covariates.push_back(cell == lvl ? 1.0 : 0.0);
            }
        }
        ds.subjects.push_back(std::move(s));
    }

    ds.validate();
    return ds;
}

void SplitSpec::validate() const {
    const double f[3] = {train_fraction, val_fraction, test_fraction};
    for (double x : f)
        if (x < 0.0 || x > 1.0) throw ConfigError("split fractions must lie in [0,1]");
    if (std::abs(f[0] + f[1] + f[2] - 1.0) > 1e-12)
        throw ConfigError("split fractions must sum to 1");
}

SplitResult stratified_split(const SurvivalDataset& dataset, const SplitSpec& spec) {
    spec.validate();
    const double fractions[3] = {spec.train_fraction, spec.val_fraction, spec.test_fraction};
    const bool all_positive =
        fractions[0] > 0.0 && fractions[1] > 0.0 && fractions[2] > 0.0;

    // Strata: group x event, enumerated in group_levels order then event.
    const std::size_t n_groups = dataset.group_levels.size();
    std::vector<std::vector<std::size_t>> strata(2 * n_groups);
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const auto& s = dataset.subjects[i];
        const std::size_t g = static_cast<std::size_t>(dataset.group_index(s.group));
        strata[2 * g + (s.event ? 1 : 0)].push_back(i);
    }

    std::vector<std::vector<std::size_t>> members(3);
    for (std::size_t k = 0; k < strata.size(); ++k) {
        auto& idx = strata[k];
        const std::string stratum_name = dataset.group_levels[k / 2] +
                                         (k % 2 ? "/event" : "/censored");
        if (idx.empty()) {
            if (all_positive)
                throw SplitError("empty stratum " + stratum_name);
            continue;
        }
        const double n = static_cast<double>(idx.size());
        std::size_t counts[3];
        double remainders[3];
        std::size_t assigned = 0;
        for (int j = 0; j < 3; ++j) {
            const double q = fractions[j] * n;
            counts[j] = static_cast<std::size_t>(std::floor(q + 1e-12));
            remainders[j] = q - std::floor(q + 1e-12);
            assigned += counts[j];
        }
        // Largest remainder; ties broken by split order (train, val, test).
        int order[3] = {0, 1, 2};
        std::stable_sort(order, order + 3,
                         [&](int a, int b) { return remainders[a] > remainders[b]; });
        for (std::size_t left = idx.size() - assigned, j = 0; left > 0; --left, ++j)
            ++counts[order[j % 3]];

        auto eng = stream(spec.seed, k);
        std::shuffle(idx.begin(), idx.end(), eng);
        std::size_t pos = 0;
        for (int j = 0; j < 3; ++j)
            for (std::size_t c = 0; c < counts[j]; ++c) members[j].push_back(idx[pos++]);
    }

    SplitResult out;
    SurvivalDataset* parts[3] = {&out.train, &out.val, &out.test};
    for (int j = 0; j < 3; ++j) {
        std::sort(members[j].begin(), members[j].end());
        parts[j]->variable_names = dataset.variable_names;
        for (std::size_t i : members[j]) parts[j]->subjects.push_back(dataset.subjects[i]);
        parts[j]->group_levels = present_levels(parts[j]->subjects, dataset.group_levels);
    }
    return out;
}

void SimSpec::validate() const {
    if (n == 0) throw ConfigError("simulation size n must be positive");
    if (group_proportions.empty()) throw ConfigError("group_proportions must be nonempty");
    double total = 0.0;
    for (const auto& [g, p] : group_proportions) {
        if (p <= 0.0 || p >= 1.0)
            if (!(group_proportions.size() == 1 && p == 1.0))
                throw ConfigError("group proportion for '" + g + "' must lie in (0,1)");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ConfigError("group proportions must sum to 1");
    if (baseline_shape <= 0.0 || baseline_scale <= 0.0)
        throw ConfigError("Weibull baseline shape and scale must be positive");
    if (!(horizon > 0.0)) throw ConfigError("horizon must be positive");
    for (const auto& [g, r] : censor_rate)
        if (r < 0.0) throw ConfigError("censor rate for '" + g + "' must be nonnegative");
}

SurvivalDataset simulate_cohort(const SimSpec& spec) {
    spec.validate();

    std::vector<std::string> continuous;
    for (const auto& [name, b] : spec.true_beta)
        if (name.rfind("group=", 0) != 0) continuous.push_back(name);

    std::vector<std::string> levels;
    for (const auto& [g, p] : spec.group_proportions) levels.push_back(g);
    std::vector<std::string> sorted_levels = levels;
    std::sort(sorted_levels.begin(), sorted_levels.end());

    SurvivalDataset ds;
    ds.variable_names = continuous;
    std::vector<std::string> indicator_level;  // non-reference levels
    for (std::size_t i = 1; i < sorted_levels.size(); ++i) {
        ds.variable_names.push_back("group=" + sorted_levels[i]);
        indicator_level.push_back(sorted_levels[i]);
    }

    auto beta_of = [&](const std::string& name) {
        for (const auto& [k, v] : spec.true_beta)
            if (k == name) return v;
        return 0.0;
    };
    std::vector<double> beta;
    for (const auto& name : ds.variable_names) beta.push_back(beta_of(name));

    std::vector<double> cum;
    double acc = 0.0;
    for (const auto& [g, p] : spec.group_proportions) cum.push_back(acc += p);
    cum.back() = 1.0;

    ds.subjects.reserve(spec.n);
    for (std::size_t i = 0; i < spec.n; ++i) {
        Subject s;
        // Group by quantile of a deterministic per-subject grid point, so
        // counts stay within 1 of n * proportion.
        const double ug = (static_cast<double>(i) + 0.5) / static_cast<double>(spec.n);
        std::size_t gi = 0;
        while (gi + 1 < cum.size() && ug >= cum[gi]) ++gi;
        s.group = levels[gi];

        auto eng = stream(spec.seed, i);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        std::normal_distribution<double> norm(0.0, 1.0);

        s.covariates.resize(ds.variable_names.size(), 0.0);
        for (std::size_t c = 0; c < continuous.size(); ++c) s.covariates[c] = norm(eng);
        for (std::size_t c = 0; c < indicator_level.size(); ++c)
            s.covariates[continuous.size() + c] = (s.group == indicator_level[c]) ? 1.0 : 0.0;

        double lp = 0.0;
        for (std::size_t c = 0; c < beta.size(); ++c) lp += beta[c] * s.covariates[c];

        // Weibull event time with hazard scaled by exp(lp), inverse transform.
        const double ue = unif(eng);
        const double event_time =
            spec.baseline_scale *
            std::pow(-std::log1p(-ue) / std::exp(lp), 1.0 / spec.baseline_shape);

        double censor_time = std::numeric_limits<double>::infinity();
        auto rit = spec.censor_rate.find(s.group);
        const double rate = rit == spec.censor_rate.end() ? 0.0 : rit->second;
        const double uc = unif(eng);  // always drawn, keeps streams aligned
        if (rate > 0.0) censor_time = -std::log1p(-uc) / rate;

        const double cutoff = std::min(censor_time, spec.horizon);
        s.event = event_time <= cutoff;
        s.time = std::max(std::min(event_time, cutoff), 1e-12);
        ds.subjects.push_back(std::move(s));
    }

    ds.group_levels = present_levels(ds.subjects, levels);
    ds.validate();
    return ds;
}

CohortSummary summarize(const SurvivalDataset& dataset) {
    if (dataset.subjects.empty()) throw DataError("summarize: empty dataset");

    auto block = [&](const std::string& label, const std::vector<const Subject*>& subs,
                     std::size_t total) {
        GroupSummary g;
        g.group = label;
        g.count = subs.size();
        g.percent = 100.0 * static_cast<double>(subs.size()) / static_cast<double>(total);
        double tsum = 0.0;
        std::size_t events = 0;
        for (const auto* s : subs) {
            tsum += s->time;
            if (s->event) ++events;
        }
        g.mean_survival_time = tsum / static_cast<double>(subs.size());
        g.event_rate = static_cast<double>(events) / static_cast<double>(subs.size());

        for (std::size_t v = 0; v < dataset.variable_names.size(); ++v) {
            VariableSummary vs;
            vs.name = dataset.variable_names[v];
            std::vector<double> vals;
            vals.reserve(subs.size());
            bool indicator = true;
            for (const auto* s : subs) {
                const double x = s->covariates[v];
                vals.push_back(x);
                if (x != 0.0 && x != 1.0) indicator = false;
            }
            vs.indicator = indicator;
            const double n = static_cast<double>(vals.size());
            const double mean = std::accumulate(vals.begin(), vals.end(), 0.0) / n;
            vs.mean = mean;
            if (vals.size() > 1) {
                double ss = 0.0;
                for (double x : vals) ss += (x - mean) * (x - mean);
                vs.sd = std::sqrt(ss / (n - 1.0));  // unbiased
            }
            vs.median = quantile(vals, 0.5);
            vs.q1 = quantile(vals, 0.25);
            vs.q3 = quantile(vals, 0.75);
            if (indicator)
                vs.count_positive = static_cast<std::size_t>(
                    std::count(vals.begin(), vals.end(), 1.0));
            g.variables.push_back(std::move(vs));
        }
        return g;
    };

    CohortSummary out;
    std::vector<const Subject*> all;
    for (const auto& s : dataset.subjects) all.push_back(&s);
    out.overall = block("", all, dataset.size());
    for (const auto& lvl : dataset.group_levels) {
        std::vector<const Subject*> subs;
        for (const auto& s : dataset.subjects)
            if (s.group == lvl) subs.push_back(&s);
        out.per_group.push_back(block(lvl, subs, dataset.size()));
    }
    return out;
}

void write_csv(const SurvivalDataset& dataset, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "time,event,group";
    for (const auto& v : dataset.variable_names) out << ',' << v;
    out << '\n';
    out.precision(17);
    for (const auto& s : dataset.subjects) {
        out << s.time << ',' << (s.event ? 1 : 0) << ',' << s.group;
        for (double x : s.covariates) out << ',' << x;
        out << '\n';
    }
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace fasm
