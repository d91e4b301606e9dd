#include "twoscale/event_data.hpp"

#include "twoscale/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace twoscale {

namespace {

constexpr double kRangeTol = 1e-9;

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& line, char delim) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(delim, start);
        out.push_back(trim(std::string_view(line).substr(start, pos == std::string::npos ? std::string::npos : pos - start)));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return out;
}

double parse_real(const std::string& field, std::size_t line, const std::string& column) {
    double v = 0.0;
    const char* first = field.data();
    const char* last = first + field.size();
    if (!field.empty() && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || field.empty() || !std::isfinite(v))
        throw ParseError(line, "column '" + column + "': cannot parse '" + field + "' as a real number");
    return v;
}

std::size_t column_index(const std::vector<std::string>& header, const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ParseError(1, "header has no column named '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
}

std::string format_real(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

CovariatePath::CovariatePath(std::vector<double> breaks, Eigen::MatrixXd values)
    : breaks_(std::move(breaks)), values_(std::move(values)) {
    if (breaks_.empty() || static_cast<Eigen::Index>(breaks_.size()) != values_.rows())
        throw std::invalid_argument("covariate path needs one break per piece");
    if (breaks_.front() != 0.0) throw std::invalid_argument("covariate path must start at duration 0");
    if (!std::is_sorted(breaks_.begin(), breaks_.end()) ||
        std::adjacent_find(breaks_.begin(), breaks_.end()) != breaks_.end())
        throw std::invalid_argument("covariate path breaks must be strictly increasing");
}

CovariatePath CovariatePath::constant(const Eigen::VectorXd& value) {
    return CovariatePath({0.0}, value.transpose());
}

Eigen::VectorXd CovariatePath::at(double x) const {
    if (!(x > 0.0) || breaks_.empty()) return Eigen::VectorXd::Zero(values_.cols());
    // piece r covers (breaks[r], breaks[r+1]]: r = (#breaks < x) - 1
    const auto it = std::lower_bound(breaks_.begin(), breaks_.end(), x);
    const auto r = static_cast<Eigen::Index>(it - breaks_.begin()) - 1;
    return values_.row(r).transpose();
}

Eigen::VectorXd SubjectRecord::x_at(double s) const {
    if (!(s > 0.0) || s > exit_time) return Eigen::VectorXd::Zero(x.values().cols());
    return x.at(s);
}

Eigen::VectorXd SubjectRecord::z_at(double s) const {
    if (!(s > 0.0) || s > exit_time) return Eigen::VectorXd::Zero(z.values().cols());
    return z.at(s);
}

std::size_t SubjectCohort::event_count() const {
    return static_cast<std::size_t>(
        std::count_if(subjects.begin(), subjects.end(), [](const SubjectRecord& s) { return s.event; }));
}

void SubjectCohort::validate() const {
    if (subjects.empty()) throw std::invalid_argument("no subjects");
    if (p == 0 || q == 0) throw std::invalid_argument("designs need at least one column");
    if (d > std::min(p, q)) throw std::invalid_argument("shared column count d exceeds min(p, q)");
    if (!(t_max > 0.0)) throw std::invalid_argument("t_max must be positive");
    if (!(a0 < a_max)) throw std::invalid_argument("age range must satisfy a0 < a_max");
    for (const auto& s : subjects) {
        const std::string who = "subject '" + s.id + "': ";
        if (s.x.dim() != p || s.z.dim() != q) throw std::invalid_argument(who + "covariate dimension mismatch");
        if (!(s.exit_time > 0.0)) throw std::invalid_argument(who + "exit_time must be positive");
        if (s.exit_time > t_max * (1 + kRangeTol)) throw std::invalid_argument(who + "exit_time beyond t_max");
        if (s.entry_age < a0 - kRangeTol * (a_max - a0)) throw std::invalid_argument(who + "entry age below a0");
        if (s.entry_age + s.exit_time > a_max + kRangeTol * (a_max - a0))
            throw std::invalid_argument(who + "exit age beyond a_max");
        if (d == 0) continue;
        std::vector<double> probes = {s.exit_time};
        for (double b : s.x.breaks()) if (b > 0.0 && b < s.exit_time) probes.push_back(b);
        for (double b : s.z.breaks()) if (b > 0.0 && b < s.exit_time) probes.push_back(b);
        for (double t : probes) {
            const Eigen::VectorXd xv = s.x_at(t);
            const Eigen::VectorXd zv = s.z_at(t);
            if (xv.head(static_cast<Eigen::Index>(d)) != zv.head(static_cast<Eigen::Index>(d)))
                throw std::invalid_argument(who + "shared columns of X and Z differ");
        }
    }
}

SubjectCohort parse_subjects(std::istream& in, const CohortSchema& schema) {
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        if (!trim(line).empty()) {
            header = split(line, schema.delimiter);
            break;
        }
    }
    if (header.empty()) throw ParseError(0, "no subjects");

    const std::vector<std::string> fixed = {"id", "entry_age", "exit_time", "event"};
    std::vector<std::size_t> fixed_idx;
    for (const auto& name : fixed) fixed_idx.push_back(column_index(header, name));

    std::vector<std::size_t> shared_idx, x_idx, z_idx;
    std::size_t p = schema.p, q = schema.q, d = schema.d;
    if (schema.named()) {
        for (const auto& c : schema.shared) shared_idx.push_back(column_index(header, c));
        for (const auto& c : schema.x_only) x_idx.push_back(column_index(header, c));
        for (const auto& c : schema.z_only) z_idx.push_back(column_index(header, c));
        d = shared_idx.size();
        p = d + x_idx.size();
        q = d + z_idx.size();
    } else {
        if (d > std::min(p, q)) throw std::invalid_argument("schema: d exceeds min(p, q)");
        const std::size_t expected = 4 + p + q - d;
        if (header.size() != expected)
            throw ParseError(line_no, "header has " + std::to_string(header.size()) + " columns, schema expects " +
                                          std::to_string(expected));
        std::size_t col = 4;
        for (std::size_t c = 0; c < d; ++c) shared_idx.push_back(col++);
        for (std::size_t c = d; c < p; ++c) x_idx.push_back(col++);
        for (std::size_t c = d; c < q; ++c) z_idx.push_back(col++);
    }

    SubjectCohort cohort;
    cohort.p = p;
    cohort.q = q;
    cohort.d = d;
    for (auto i : shared_idx) cohort.covariate_names.push_back(header[i]);
    for (auto i : x_idx) cohort.covariate_names.push_back(header[i]);
    for (auto i : z_idx) cohort.covariate_names.push_back(header[i]);

    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split(line, schema.delimiter);
        if (fields.size() != header.size())
            throw ParseError(line_no, "expected " + std::to_string(header.size()) + " columns, found " +
                                          std::to_string(fields.size()));
        SubjectRecord rec;
        rec.id = fields[fixed_idx[0]];
        rec.entry_age = parse_real(fields[fixed_idx[1]], line_no, "entry_age");
        rec.exit_time = parse_real(fields[fixed_idx[2]], line_no, "exit_time");
        const auto& ev = fields[fixed_idx[3]];
        if (ev != "0" && ev != "1") throw ParseError(line_no, "event flag must be 0 or 1, found '" + ev + "'");
        rec.event = ev == "1";
        if (!(rec.exit_time > 0.0)) throw ParseError(line_no, "exit_time must be positive");
        if (rec.entry_age < 0.0) throw ParseError(line_no, "entry_age must be non-negative");

        Eigen::VectorXd xv(static_cast<Eigen::Index>(p)), zv(static_cast<Eigen::Index>(q));
        Eigen::Index c = 0;
        for (auto i : shared_idx) {
            const double v = parse_real(fields[i], line_no, header[i]);
            xv[c] = v;
            zv[c] = v;
            ++c;
        }
        for (std::size_t r = 0; r < x_idx.size(); ++r)
            xv[static_cast<Eigen::Index>(d + r)] = parse_real(fields[x_idx[r]], line_no, header[x_idx[r]]);
        for (std::size_t r = 0; r < z_idx.size(); ++r)
            zv[static_cast<Eigen::Index>(d + r)] = parse_real(fields[z_idx[r]], line_no, header[z_idx[r]]);
        rec.x = CovariatePath::constant(xv);
        rec.z = CovariatePath::constant(zv);
        cohort.subjects.push_back(std::move(rec));
    }
    if (cohort.subjects.empty()) throw ParseError(0, "no subjects");

    double t_max = 0.0, a_lo = cohort.subjects.front().entry_age, a_hi = 0.0;
    for (const auto& s : cohort.subjects) {
        t_max = std::max(t_max, s.exit_time);
        a_lo = std::min(a_lo, s.entry_age);
        a_hi = std::max(a_hi, s.entry_age + s.exit_time);
    }
    cohort.t_max = schema.t_max.value_or(t_max);
    cohort.a0 = schema.a0.value_or(a_lo);
    cohort.a_max = schema.a_max.value_or(a_hi);
    try {
        cohort.validate();
    } catch (const std::invalid_argument& e) {
        throw ParseError(0, e.what());
    }
    return cohort;
}

SubjectCohort parse_subjects_file(const std::string& path, const CohortSchema& schema) {
    std::ifstream in(path);
    if (!in) throw std::ios_base::failure("cannot open '" + path + "'");
    return parse_subjects(in, schema);
}

void write_subjects(std::ostream& out, const SubjectCohort& cohort) {
    std::vector<std::string> names = cohort.covariate_names;
    const std::size_t ncov = cohort.p + cohort.q - cohort.d;
    if (names.size() != ncov) {
        names.clear();
        for (std::size_t c = 0; c < cohort.d; ++c) names.push_back("shared" + std::to_string(c + 1));
        for (std::size_t c = cohort.d; c < cohort.p; ++c) names.push_back("x" + std::to_string(c + 1));
        for (std::size_t c = cohort.d; c < cohort.q; ++c) names.push_back("z" + std::to_string(c + 1));
    }
    out << "id,entry_age,exit_time,event";
    for (const auto& nm : names) out << ',' << nm;
    out << '\n';
    for (const auto& s : cohort.subjects) {
        if (s.x.pieces() != 1 || s.z.pieces() != 1)
            throw std::invalid_argument("write_subjects supports time-constant covariates only");
        out << s.id << ',' << format_real(s.entry_age) << ',' << format_real(s.exit_time) << ','
            << (s.event ? 1 : 0);
        const auto xv = s.x.values().row(0);
        const auto zv = s.z.values().row(0);
        for (std::size_t c = 0; c < cohort.p; ++c) out << ',' << format_real(xv[static_cast<Eigen::Index>(c)]);
        for (std::size_t c = cohort.d; c < cohort.q; ++c) out << ',' << format_real(zv[static_cast<Eigen::Index>(c)]);
        out << '\n';
    }
}

std::vector<std::size_t> IncrementMatrix::cell_entries(Axis axis, std::size_t cell) const {
    if (axis == Axis::duration) {
        std::vector<std::size_t> out;
        for (auto e = t_offsets[cell]; e < t_offsets[cell + 1]; ++e) out.push_back(e);
        return out;
    }
    return {a_order.begin() + static_cast<std::ptrdiff_t>(a_offsets[cell]),
            a_order.begin() + static_cast<std::ptrdiff_t>(a_offsets[cell + 1])};
}

Eigen::MatrixXd IncrementMatrix::design(Axis axis, std::size_t cell) const {
    const auto idx = cell_entries(axis, cell);
    const auto& rows = axis == Axis::duration ? x_rows : z_rows;
    const double scale = axis == Axis::duration ? 1.0 : kappa;
    Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), rows.cols());
    for (std::size_t r = 0; r < idx.size(); ++r)
        out.row(static_cast<Eigen::Index>(r)) = scale * rows.row(static_cast<Eigen::Index>(idx[r]));
    return out;
}

Eigen::VectorXd IncrementMatrix::delta_n(Axis axis, std::size_t cell) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    for (auto e : cell_entries(axis, cell)) out[static_cast<Eigen::Index>(entries[e].subject)] += entries[e].dN;
    return out;
}

double IncrementMatrix::total_events() const {
    double s = 0.0;
    for (const auto& e : entries) s += e.dN;
    return s;
}

Eigen::VectorXd IncrementMatrix::dN() const {
    Eigen::VectorXd out(static_cast<Eigen::Index>(entries.size()));
    for (std::size_t e = 0; e < entries.size(); ++e) out[static_cast<Eigen::Index>(e)] = entries[e].dN;
    return out;
}

IncrementMatrix counting_increments(const SubjectCohort& cohort, const TwoScaleGrid& grid) {
    if (grid.j() < 2 || grid.k() < 2) throw std::invalid_argument("grid needs at least 2 points per axis");
    cohort.validate();
    const double t_tol = kRangeTol * grid.t_max();
    const double a_tol = kRangeTol * (grid.a_max() - grid.a0());

    IncrementMatrix inc;
    inc.grid = grid;
    inc.n = cohort.n();
    inc.p = cohort.p;
    inc.q = cohort.q;
    inc.d = cohort.d;
    inc.kappa = grid.dt() / grid.da();

    struct Staged {
        CellEntry entry;
        Eigen::VectorXd x, z;
    };
    std::vector<std::vector<Staged>> by_cell(grid.j());
    for (std::size_t i = 0; i < cohort.n(); ++i) {
        const auto& s = cohort.subjects[i];
        if (s.exit_time > grid.t_max() + t_tol)
            throw std::invalid_argument("subject '" + s.id + "': exit/event time beyond t_max of the grid");
        if (s.entry_age < grid.a0() - a_tol || s.entry_age + s.exit_time > grid.a_max() + a_tol)
            throw std::invalid_argument("subject '" + s.id + "': ages outside the age grid");
        inc.entry_ages.push_back(s.entry_age);
        const std::size_t last = grid.snap_up(Axis::duration, s.exit_time);
        for (std::size_t l = 1; l <= last; ++l) {
            const double s_l = grid.t_points()[static_cast<Eigen::Index>(l)];
            const double at = std::min(s_l, s.exit_time);
            const double age = std::min(s.entry_age + s_l, grid.a_max());
            Staged st{{i, l, grid.snap_up(Axis::age, age), (s.event && l == last) ? 1.0 : 0.0}, s.x.at(at),
                      s.z.at(at)};
            if (st.entry.a_cell == 0) st.entry.a_cell = 1;
            by_cell[l].push_back(std::move(st));
        }
    }

    std::size_t total = 0;
    for (const auto& c : by_cell) total += c.size();
    inc.x_rows.resize(static_cast<Eigen::Index>(total), static_cast<Eigen::Index>(cohort.p));
    inc.z_rows.resize(static_cast<Eigen::Index>(total), static_cast<Eigen::Index>(cohort.q));
    inc.entries.reserve(total);
    inc.t_offsets.assign(grid.j() + 1, 0);
    for (std::size_t l = 0; l < grid.j(); ++l) {
        inc.t_offsets[l] = inc.entries.size();
        for (auto& st : by_cell[l]) {
            const auto r = static_cast<Eigen::Index>(inc.entries.size());
            inc.x_rows.row(r) = st.x.transpose();
            inc.z_rows.row(r) = st.z.transpose();
            inc.entries.push_back(st.entry);
        }
    }
    inc.t_offsets[grid.j()] = inc.entries.size();

    // counting sort of entries by age cell
    inc.a_offsets.assign(grid.k() + 1, 0);
    for (const auto& e : inc.entries) ++inc.a_offsets[e.a_cell + 1];
    for (std::size_t m = 0; m < grid.k(); ++m) inc.a_offsets[m + 1] += inc.a_offsets[m];
    inc.a_order.assign(inc.entries.size(), 0);
    std::vector<std::size_t> fill(inc.a_offsets.begin(), inc.a_offsets.end() - 1);
    for (std::size_t e = 0; e < inc.entries.size(); ++e) inc.a_order[fill[inc.entries[e].a_cell]++] = e;
    return inc;
}

}  // namespace twoscale
