// Curated-table I/O: parsing, canonical serialization, the expression grammar,
// name resolution and the degree-arithmetic validator.

#include "mayengine/tables.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace may::tab {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }
bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }
bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

std::string trim(const std::string& s) {
    size_t a = 0, b = s.size();
    while (a < b && is_space(s[a])) ++a;
    while (b > a && is_space(s[b - 1])) --b;
    return s.substr(a, b - a);
}

// Collapse runs of internal whitespace to single spaces (canonical form).
std::string collapse_ws(const std::string& s) {
    std::string out;
    bool pending = false;
    for (char c : s) {
        if (is_space(c)) {
            pending = !out.empty();
        } else {
            if (pending) out += ' ';
            pending = false;
            out += c;
        }
    }
    return out;
}

bool all_digits(const std::string& s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), is_digit);
}

int depth_step(char c, int& d) {
    if (c == '(' || c == '{' || c == '[' || c == '<') ++d;
    else if (c == ')' || c == '}' || c == ']' || c == '>') --d;
    return d;
}

std::string degree_str(const std::vector<int>& deg) {
    std::string out = "(";
    for (size_t i = 0; i < deg.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(deg[i]);
    }
    return out + ")";
}

// ---------------------------------------------------------------------------
// Expression lexer/parser.

struct Lexer {
    const std::string& s;
    size_t i = 0;

    explicit Lexer(const std::string& src) : s(src) {}
    void skip_ws() {
        while (i < s.size() && is_space(s[i])) ++i;
    }
    char peek() {
        skip_ws();
        return i < s.size() ? s[i] : '\0';
    }
    [[noreturn]] void fail(const std::string& msg) const {
        throw std::runtime_error("parse error: " + msg + " in '" + s + "' at offset " +
                                 std::to_string(i));
    }
    std::string lex_int() {
        size_t start = i;
        while (i < s.size() && is_digit(s[i])) ++i;
        return s.substr(start, i - start);
    }
    // [A-Za-z][A-Za-z0-9.]* '* ( "(" digits ("," digits)* ")" )?
    std::string lex_name() {
        size_t start = i;
        ++i;
        while (i < s.size() && (is_alnum(s[i]) || s[i] == '.')) ++i;
        while (i < s.size() && s[i] == '\'') ++i;
        if (i + 1 < s.size() && s[i] == '(' && is_digit(s[i + 1])) {
            size_t j = i + 1;
            while (j < s.size() && (is_digit(s[j]) || s[j] == ',')) ++j;
            if (j < s.size() && s[j] == ')') i = j + 1;
        }
        return s.substr(start, i - start);
    }
    // At an opening bracket: return the inner text, advance past the close.
    std::string lex_balanced(char open, char close) {
        size_t start = i;
        int depth = 0;
        for (; i < s.size(); ++i) {
            if (s[i] == open) ++depth;
            else if (s[i] == close && --depth == 0) {
                ++i;
                return s.substr(start + 1, i - start - 2);
            }
        }
        fail(std::string("unbalanced '") + open + "'");
    }
};

// Parses one factor into `t`; sets `zero` when the factor is the literal 0
// or an even integer (which kills the term over F2).
void parse_factor(Lexer& lx, ParsedTerm& t, bool& zero) {
    char c = lx.peek();
    std::string name;
    if (is_digit(c)) {
        name = lx.lex_int();
    } else if (c == '(') {
        name = "(" + trim(lx.lex_balanced('(', ')')) + ")";
    } else if (c == '{') {
        name = "{" + trim(lx.lex_balanced('{', '}')) + "}";
    } else if (is_alpha(c)) {
        name = lx.lex_name();
        if (name == "bar" && lx.peek() == '(')
            name = "bar(" + trim(lx.lex_balanced('(', ')')) + ")";
    } else {
        lx.fail("unexpected character");
    }
    int k = 1;
    if (lx.peek() == '^') {
        ++lx.i;
        if (!is_digit(lx.peek())) lx.fail("exponent must be an integer");
        k = std::stoi(lx.lex_int());
    }
    if (name == "tau") {
        t.tau_exp += k;
    } else if (name == "0") {
        zero = true;
    } else {
        // Integer coefficients are kept as factors: they are scalars in the
        // homotopy grading and F2 coefficients only when resolved to algebra.
        t.factors.emplace_back(name, k);
    }
}

ParsedExpr parse_expr_at(Lexer& lx) {
    ParsedExpr e;
    for (;;) {
        ParsedTerm t;
        bool zero = false;
        parse_factor(lx, t, zero);
        while (lx.peek() == '*') {
            ++lx.i;
            parse_factor(lx, t, zero);
        }
        if (!zero) e.terms.push_back(std::move(t));
        if (lx.peek() != '+') break;
        ++lx.i;
    }
    return e;
}

}  // namespace

ParsedExpr parse_expression(const std::string& src) {
    std::string s = trim(src);
    if (s.empty()) return {};
    Lexer lx(s);
    ParsedExpr e = parse_expr_at(lx);
    if (lx.peek() != '\0') lx.fail("trailing input");
    return e;
}

std::vector<std::string> split_alternatives(const std::string& cell) {
    std::vector<std::string> out;
    int d = 0;
    size_t start = 0;
    for (size_t i = 0; i < cell.size(); ++i) {
        char c = cell[i];
        if (c == ',' && d == 0) {
            out.push_back(trim(cell.substr(start, i - start)));
            start = i + 1;
        } else {
            depth_step(c, d);
        }
    }
    out.push_back(trim(cell.substr(start)));
    if (out.size() == 1 && out[0].empty()) out.clear();
    return out;
}

std::optional<Statement> split_statement(const std::string& cell) {
    static const std::vector<std::string> kws = {"subset", "intersects", "contains", "in"};
    int d = 0;
    for (size_t i = 0; i < cell.size(); ++i) {
        char c = cell[i];
        if (d == 0) {
            if (c == '=')
                return Statement{trim(cell.substr(0, i)), "=", trim(cell.substr(i + 1))};
            bool boundary = (i == 0 || is_space(cell[i - 1]));
            if (boundary && is_alpha(c)) {
                for (const auto& kw : kws) {
                    if (cell.compare(i, kw.size(), kw) == 0 &&
                        (i + kw.size() == cell.size() || is_space(cell[i + kw.size()]))) {
                        return Statement{trim(cell.substr(0, i)), kw,
                                         trim(cell.substr(i + kw.size()))};
                    }
                }
            }
        }
        depth_step(c, d);
    }
    return std::nullopt;
}

std::optional<std::vector<std::string>> split_bracket(const std::string& src) {
    std::string s = trim(src);
    if (s.empty() || s.front() != '<' || s.back() != '>') return std::nullopt;
    int d = 0;
    for (size_t i = 0; i < s.size(); ++i) {
        depth_step(s[i], d);
        if (d == 0 && i + 1 != s.size()) return std::nullopt;  // '>' closes early
    }
    if (d != 0) return std::nullopt;
    std::string inner = s.substr(1, s.size() - 2);
    std::vector<std::string> args;
    d = 0;
    size_t start = 0;
    for (size_t i = 0; i < inner.size(); ++i) {
        char c = inner[i];
        if (c == ',' && d == 0) {
            args.push_back(trim(inner.substr(start, i - start)));
            start = i + 1;
        } else {
            depth_step(c, d);
        }
    }
    args.push_back(trim(inner.substr(start)));
    return args;
}

// ---------------------------------------------------------------------------
// Table I/O.

TriDegree TableRecord::tri() const {
    if (degree.size() != 3)
        throw std::runtime_error(table + ":" + std::to_string(line_no) +
                                 ": expected a 3-graded degree");
    return {degree[0], degree[1], degree[2]};
}

MayDegree TableRecord::mayd() const {
    if (degree.size() != 4)
        throw std::runtime_error(table + ":" + std::to_string(line_no) +
                                 ": expected a 4-graded degree");
    return {degree[0], degree[1], degree[2], degree[3]};
}

TableFile parse_table_file(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("cannot open table file " + file.string());
    TableFile tf;
    tf.stem = file.stem().string();
    std::string line;
    int line_no = 0;
    bool saw_header = false;
    auto fail = [&](const std::string& msg) -> void {
        throw std::runtime_error(file.filename().string() + ":" + std::to_string(line_no) +
                                 ": " + msg);
    };
    while (std::getline(in, line)) {
        ++line_no;
        std::string t = trim(line);
        if (t.empty()) continue;
        if (!saw_header) {
            if (t != "!v1") fail("missing !v1 header");
            saw_header = true;
            continue;
        }
        if (t[0] == '#') {
            tf.comments.push_back(t);
            continue;
        }
        std::vector<std::string> cells;
        size_t start = 0;
        for (size_t i = 0; i <= t.size(); ++i) {
            if (i == t.size() || t[i] == '|') {
                cells.push_back(trim(t.substr(start, i - start)));
                start = i + 1;
            }
        }
        if (cells.size() < 2) fail("expected at least name and degree cells");
        if (cells.size() > 5) fail("too many cells");
        TableRecord r;
        r.table = tf.stem;
        r.line_no = line_no;
        r.name = cells[0];
        std::string d = cells[1];
        if (d.size() < 3 || d.front() != '(' || d.back() != ')')
            fail("degree must be parenthesized: '" + d + "'");
        std::string body = d.substr(1, d.size() - 2);
        size_t p = 0;
        while (true) {
            size_t q = body.find(',', p);
            std::string num = trim(body.substr(p, q == std::string::npos ? q : q - p));
            if (num.empty() || !std::all_of(num.begin(), num.end(), [](char c) {
                    return is_digit(c) || c == '-';
                }) || (num[0] == '-' && num.size() == 1))
                fail("bad degree entry '" + num + "'");
            r.degree.push_back(std::stoi(num));
            if (q == std::string::npos) break;
            p = q + 1;
        }
        if (r.degree.empty() || r.degree.size() > 4) fail("degree arity must be 1..4");
        if (cells.size() > 2) r.value = cells[2];
        if (cells.size() > 3) r.description = cells[3];
        if (cells.size() > 4) r.provenance = cells[4];
        tf.records.push_back(std::move(r));
    }
    if (!saw_header) fail("empty table file (no !v1 header)");
    return tf;
}

std::string serialize_table_file(const TableFile& tf) {
    std::string out = "!v1\n";
    for (const auto& c : tf.comments) out += c + "\n";
    for (const auto& r : tf.records) {
        std::vector<std::string> cells = {collapse_ws(r.name), degree_str(r.degree),
                                          collapse_ws(r.value), collapse_ws(r.description),
                                          collapse_ws(r.provenance)};
        while (!cells.empty() && cells.back().empty()) cells.pop_back();
        std::string line;
        for (size_t i = 0; i < cells.size(); ++i) {
            if (i) line += " | ";
            line += cells[i];
        }
        out += line + "\n";
    }
    return out;
}

std::vector<TableRecord> load_table(const std::filesystem::path& file) {
    return parse_table_file(file).records;
}

// ---------------------------------------------------------------------------
// NameTable.

void NameTable::add(NameEntry e) {
    auto [it, fresh] = entries_.emplace(e.name, std::move(e));
    if (!fresh) throw std::runtime_error("NameTable: duplicate name '" + it->first + "'");
}

const NameEntry* NameTable::find(const std::string& name) const {
    auto it = entries_.find(name);
    return it == entries_.end() ? nullptr : &it->second;
}

std::vector<std::string> NameTable::names() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& [k, v] : entries_) out.push_back(k);
    return out;
}

std::optional<DegreeInfo> NameTable::degree_of(const ParsedExpr& e, bool classical) const {
    auto factor_degree = [&](const std::string& name) -> DegreeInfo {
        if (all_digits(name)) return DegreeInfo{{0, 0, 0}, 0, true};
        if (name.size() >= 2 && name.front() == '{' && name.back() == '}') {
            // Set of classes detected by an Ext class (alternatives allowed).
            std::optional<DegreeInfo> acc;
            for (const auto& alt :
                 split_alternatives(name.substr(1, name.size() - 2))) {
                auto d = degree_of(alt, classical);
                if (!d) continue;
                d->m = std::nullopt;
                if (!acc) {
                    acc = d;
                } else {
                    if (acc->tri.s != d->tri.s || acc->tri.f != d->tri.f)
                        throw std::runtime_error("inhomogeneous alternatives in '" + name +
                                                 "'");
                    if (acc->w_known && d->w_known && acc->tri.w != d->tri.w)
                        throw std::runtime_error("inhomogeneous weight in '" + name + "'");
                    if (!acc->w_known && d->w_known) {
                        acc->tri.w = d->tri.w;
                        acc->w_known = true;
                    }
                }
            }
            if (!acc) throw std::runtime_error("empty class expression '" + name + "'");
            return *acc;
        }
        if (name.size() >= 5 && name.compare(0, 4, "bar(") == 0 && name.back() == ')') {
            auto d = degree_of(name.substr(4, name.size() - 5), classical);
            if (!d) throw std::runtime_error("bar of the zero expression");
            d->tri = d->tri + TriDegree{1, -1, -1};
            d->m = std::nullopt;
            return *d;
        }
        if (name.size() >= 2 && name.front() == '(' && name.back() == ')') {
            auto d = degree_of(name.substr(1, name.size() - 2), classical);
            if (!d) throw std::runtime_error("parenthesized zero expression");
            return *d;
        }
        const NameEntry* en = find(name);
        if (!en) throw std::runtime_error("unknown name '" + name + "'");
        DegreeInfo d;
        d.tri = en->deg.tri();
        d.m = en->m_known ? std::optional<int>(en->deg.m) : std::nullopt;
        d.w_known = en->w_known;
        return d;
    };

    std::optional<DegreeInfo> acc;
    for (const auto& term : e.terms) {
        DegreeInfo d{{0, 0, 0}, 0, true};
        d.tri.w -= term.tau_exp;  // tau has degree (0,0,-1)
        for (const auto& [name, k] : term.factors) {
            DegreeInfo f = factor_degree(name);
            d.tri.s += f.tri.s * k;
            d.tri.f += f.tri.f * k;
            d.tri.w += f.tri.w * k;
            if (d.m && f.m) *d.m += *f.m * k;
            else d.m = std::nullopt;
            d.w_known = d.w_known && f.w_known;
        }
        if (classical) {
            d.tri.w = 0;
            d.w_known = true;
        }
        if (!acc) {
            acc = d;
            continue;
        }
        if (acc->tri.s != d.tri.s || acc->tri.f != d.tri.f)
            throw std::runtime_error("inhomogeneous expression: (" +
                                     std::to_string(acc->tri.s) + "," +
                                     std::to_string(acc->tri.f) + ") vs (" +
                                     std::to_string(d.tri.s) + "," + std::to_string(d.tri.f) +
                                     ")");
        if (acc->w_known && d.w_known && acc->tri.w != d.tri.w)
            throw std::runtime_error("inhomogeneous weight: " + std::to_string(acc->tri.w) +
                                     " vs " + std::to_string(d.tri.w));
        if (!acc->w_known && d.w_known) {
            acc->tri.w = d.tri.w;
            acc->w_known = true;
        }
        if (!(acc->m && d.m && *acc->m == *d.m)) acc->m = std::nullopt;
    }
    return acc;
}

std::optional<DegreeInfo> NameTable::degree_of(const std::string& src, bool classical) const {
    return degree_of(parse_expression(src), classical);
}

std::optional<alg::Element> NameTable::resolve(const ParsedExpr& e,
                                               const alg::Registry& reg) const {
    alg::Element total = alg::Element::zero();
    for (const auto& term : e.terms) {
        alg::Monomial unit = alg::Monomial::one(reg);
        unit.tau_exp = term.tau_exp;
        alg::Element acc = alg::Element::from(unit);
        bool dead = false;
        for (const auto& [name, k] : term.factors) {
            if (all_digits(name)) {
                if (std::stol(name) % 2 == 0) dead = true;  // zero over F2
                continue;
            }
            alg::Element f;
            if (name.front() == '(' && name.back() == ')') {
                auto sub = resolve(parse_expression(name.substr(1, name.size() - 2)), reg);
                if (!sub) return std::nullopt;
                f = *sub;
            } else if (name.front() == '{' ||
                       (name.size() >= 4 && name.compare(0, 4, "bar(") == 0)) {
                return std::nullopt;  // not an element of this algebra
            } else {
                const NameEntry* en = find(name);
                if (!en || !en->poly) return std::nullopt;
                f = *en->poly;
            }
            for (int i = 0; i < k; ++i) acc = acc.times(f);
        }
        if (!dead) total = total + acc;
    }
    return total;
}

// ---------------------------------------------------------------------------
// Dataset.

const std::vector<TableRecord>& Dataset::table(const std::string& stem) const {
    auto it = tables.find(stem);
    if (it == tables.end()) throw std::out_of_range("dataset has no table '" + stem + "'");
    return it->second;
}

Dataset load_dataset(const std::filesystem::path& dir, int max_stem, bool classical) {
    Dataset ds;
    ds.dir = dir;
    ds.max_stem = max_stem;
    ds.classical = classical;

    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".txt")
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        TableFile tf = parse_table_file(f);
        ds.tables[tf.stem] = std::move(tf.records);
        ds.comments[tf.stem] = std::move(tf.comments);
    }

    ds.e1 = alg::Registry::e1(max_stem, classical);
    ds.e2.set_classical(classical);

    // E1 primitives get degree-only entries, over the full table window so that
    // representative expressions in the tables always resolve.
    alg::Registry e1_full = alg::Registry::e1(70, classical);
    for (int i = 0; i < e1_full.size(); ++i) {
        const auto& g = e1_full.info(i);
        ds.names.add(NameEntry{g.name, g.deg, true, true, std::nullopt});
    }

    if (ds.has_table("may_e2_gen")) {
        for (const auto& r : ds.table("may_e2_gen"))
            ds.e2.add(
                alg::GeneratorInfo{r.name, r.mayd(), alg::GeneratorInfo::PageGenerator, 0, 0});
        for (const auto& r : ds.table("may_e2_gen")) {
            alg::Monomial mono = alg::Monomial::one(ds.e2);
            mono.e[*ds.e2.find(r.name)] = 1;
            ds.names.add(NameEntry{r.name, r.mayd(), true, true, alg::Element::from(mono)});
        }
    }

    if (ds.has_table("names_extra")) {
        for (const auto& r : ds.table("names_extra")) {
            NameEntry e;
            e.name = r.name;
            if (r.degree.size() == 4) {
                e.deg = r.mayd();
            } else if (r.degree.size() == 3) {
                e.deg = {0, r.degree[0], r.degree[1], r.degree[2]};
                e.m_known = false;
            } else if (r.degree.size() == 2) {
                e.deg = {0, r.degree[0], r.degree[1], 0};
                e.m_known = false;
                e.w_known = false;
            } else {
                throw std::runtime_error("names_extra:" + std::to_string(r.line_no) +
                                         ": bad arity");
            }
            if (!r.value_unknown()) {
                auto poly = ds.names.resolve(parse_expression(r.value), ds.e2);
                if (poly) e.poly = *poly;
            }
            ds.names.add(std::move(e));
        }
    }

    if (ds.has_table("notation"))
        for (const auto& r : ds.table("notation"))
            if (r.degree.size() == 2)
                ds.homotopy[r.name] = {r.degree[0], r.degree[1]};

    if (ds.has_table("may_e2_gen")) {
        for (const auto& r : ds.table("may_e2_gen")) {
            if (r.value_unknown() || r.value == "0") continue;
            auto v = ds.names.resolve(parse_expression(r.value), ds.e2);
            if (!v)
                throw std::runtime_error("may_e2_gen:" + std::to_string(r.line_no) +
                                         ": unresolvable d2 value '" + r.value + "'");
            ds.d2[r.name] = *v;
        }
    }
    return ds;
}

std::filesystem::path resolve_data_dir(const std::string& cli_flag) {
    if (!cli_flag.empty()) return cli_flag;
    if (const char* env = std::getenv("MAYENGINE_DATA"); env && *env) return env;
#ifdef MAYENGINE_DEFAULT_DATA
    return MAYENGINE_DEFAULT_DATA;
#else
    return "data/v1";
#endif
}

// ---------------------------------------------------------------------------
// Validation.

namespace {

struct Validator {
    const Dataset& ds;
    std::vector<ValidationIssue> issues;

    void add(const TableRecord& r, const std::string& rule, const std::string& detail) {
        issues.push_back({r.table + ".txt", r.line_no, rule, detail});
    }

    static bool skippable(const std::string& src) {
        return src.empty() || src == "?" || src == "0";
    }

    std::optional<DegreeInfo> ext_deg(const TableRecord& r, const std::string& src,
                                      const std::string& rule, bool classical = false) {
        if (skippable(src)) return std::nullopt;
        try {
            return ds.names.degree_of(src, classical);
        } catch (const std::exception& ex) {
            add(r, rule, std::string(ex.what()) + " in '" + src + "'");
            return std::nullopt;
        }
    }

    // Exact (s,f) + (w where known) + (m where requested) comparison.
    void check_ext(const TableRecord& r, const std::string& src, const std::string& rule,
                   const TriDegree& want, std::optional<int> want_m, bool strict_m) {
        auto d = ext_deg(r, src, rule);
        if (!d) return;
        if (d->tri.s != want.s || d->tri.f != want.f ||
            (d->w_known && d->tri.w != want.w)) {
            add(r, rule, "'" + src + "' has degree " + d->tri.str() + ", expected " +
                             want.str());
            return;
        }
        if (want_m) {
            if (d->m) {
                if (*d->m != *want_m)
                    add(r, rule, "'" + src + "' has May filtration " +
                                     std::to_string(*d->m) + ", expected " +
                                     std::to_string(*want_m));
            } else if (strict_m) {
                add(r, rule, "May filtration of '" + src + "' is not recomputable");
            }
        }
    }

    void check_ext_alts(const TableRecord& r, const std::string& cell,
                        const std::string& rule, const TriDegree& want,
                        std::optional<int> want_m, bool strict_m) {
        if (skippable(cell)) return;
        for (const auto& alt : split_alternatives(cell))
            check_ext(r, alt, rule, want, want_m, strict_m);
    }

    // name cell that may be a relation "lhs = rhs"; both sides have the degree.
    void check_relation(const TableRecord& r, const std::string& cell,
                        const std::string& rule, const TriDegree& want,
                        std::optional<int> want_m, bool strict_m) {
        auto st = split_statement(cell);
        if (st && st->rel == "=") {
            check_ext(r, st->lhs, rule, want, want_m, strict_m);
            check_ext(r, st->rhs, rule, want, want_m, strict_m);
        } else {
            check_ext(r, cell, rule, want, want_m, strict_m);
        }
    }

    // ---- homotopy degrees (s,w), w optional -------------------------------
    struct HDeg {
        int s = 0;
        std::optional<int> w = 0;
    };

    HDeg hfactor(const std::string& name) {
        if (all_digits(name)) return {0, 0};
        if (name.size() >= 2 && name.front() == '{' && name.back() == '}') {
            std::optional<HDeg> acc;
            for (const auto& alt : split_alternatives(name.substr(1, name.size() - 2))) {
                auto d = ds.names.degree_of(alt);
                if (!d) continue;
                HDeg h{d->tri.s,
                       d->w_known ? std::optional<int>(d->tri.w) : std::nullopt};
                if (!acc) {
                    acc = h;
                } else {
                    if (acc->s != h.s)
                        throw std::runtime_error("inhomogeneous alternatives in '" + name +
                                                 "'");
                    if (acc->w && h.w && *acc->w != *h.w)
                        throw std::runtime_error("inhomogeneous weight in '" + name + "'");
                    if (!acc->w) acc->w = h.w;
                }
            }
            if (!acc) throw std::runtime_error("empty class expression '" + name + "'");
            return *acc;
        }
        if (name.size() >= 2 && name.front() == '(' && name.back() == ')') {
            auto h = hexpr(parse_expression(name.substr(1, name.size() - 2)));
            if (!h) throw std::runtime_error("zero group in homotopy expression");
            return *h;
        }
        auto it = ds.homotopy.find(name);
        if (it == ds.homotopy.end())
            throw std::runtime_error("unknown homotopy name '" + name + "'");
        return {it->second.first, it->second.second};
    }

    std::optional<HDeg> hexpr(const ParsedExpr& e) {
        std::optional<HDeg> acc;
        for (const auto& term : e.terms) {
            HDeg d{0, 0};
            *d.w -= term.tau_exp;  // tau has homotopy degree (0,-1)
            for (const auto& [name, k] : term.factors) {
                HDeg f = hfactor(name);
                d.s += f.s * k;
                if (d.w && f.w) *d.w += *f.w * k;
                else d.w = std::nullopt;
            }
            if (!acc) {
                acc = d;
                continue;
            }
            if (acc->s != d.s)
                throw std::runtime_error("inhomogeneous homotopy expression");
            if (acc->w && d.w && *acc->w != *d.w)
                throw std::runtime_error("inhomogeneous homotopy weight");
            if (!acc->w) acc->w = d.w;
        }
        return acc;
    }

    void check_h(const TableRecord& r, const std::string& side, const std::string& rule,
                 int s, std::optional<int> w) {
        if (skippable(side)) return;
        try {
            ParsedExpr e = parse_expression(side);
            auto h = hexpr(e);
            if (!h) return;
            bool ok = h->s == s && (!w || !h->w || *h->w == *w);
            if (!ok && e.terms.size() == 1 && e.terms[0].tau_exp == 0 &&
                e.terms[0].factors.size() == 1 && e.terms[0].factors[0].second == 1 &&
                e.terms[0].factors[0].first.front() == '{') {
                // A literal set of homotopy classes, e.g. {2*nu,6*nu}: interpret
                // the contents in the homotopy grading instead.
                const std::string& nm = e.terms[0].factors[0].first;
                ok = true;
                for (const auto& alt :
                     split_alternatives(nm.substr(1, nm.size() - 2))) {
                    auto h2 = hexpr(parse_expression(alt));
                    if (!h2 || h2->s != s || (w && h2->w && *h2->w != *w)) ok = false;
                }
            }
            if (!ok)
                add(r, rule, "'" + side + "' has homotopy degree (" + std::to_string(h->s) +
                                 (h->w ? "," + std::to_string(*h->w) : ",?") +
                                 "), expected (" + std::to_string(s) +
                                 (w ? "," + std::to_string(*w) : "") + ")");
        } catch (const std::exception& ex) {
            add(r, rule, std::string(ex.what()) + " in '" + side + "'");
        }
    }

    void check_hstmt(const TableRecord& r, const std::string& cell, const std::string& rule,
                     int s, std::optional<int> w) {
        if (skippable(cell)) return;
        auto st = split_statement(cell);
        if (st) {
            check_h(r, st->lhs, rule, s, w);
            check_h(r, st->rhs, rule, s, w);
        } else {
            check_h(r, cell, rule, s, w);
        }
    }

    // n-fold homotopy bracket: s = sum s_i + (n-2), w = sum w_i.
    void check_hbracket(const TableRecord& r, const std::string& src,
                        const std::string& rule, int s, std::optional<int> w) {
        auto args = split_bracket(src);
        if (!args || args->size() < 3) {
            add(r, rule, "'" + src + "' is not a bracket");
            return;
        }
        int S = static_cast<int>(args->size()) - 2;
        int W = 0;
        bool wk = true;
        for (const auto& a : *args) {
            try {
                auto h = hexpr(parse_expression(a));
                if (!h) {
                    add(r, rule, "zero bracket argument in '" + src + "'");
                    return;
                }
                S += h->s;
                if (wk && h->w) W += *h->w;
                else wk = false;
            } catch (const std::exception& ex) {
                add(r, rule, std::string(ex.what()) + " in '" + src + "'");
                return;
            }
        }
        if (S != s || (w && wk && W != *w))
            add(r, rule, "bracket '" + src + "' has degree (" + std::to_string(S) +
                             (wk ? "," + std::to_string(W) : ",?") + "), expected (" +
                             std::to_string(s) + (w ? "," + std::to_string(*w) : "") + ")");
    }

    // Threefold (or n-fold) Ext bracket: deg = sum deg(a_i) + (n-2)*(1,-1,0).
    void check_ext_bracket(const TableRecord& r, const std::string& src,
                           const std::string& rule, const TriDegree& want) {
        auto args = split_bracket(src);
        if (!args || args->size() < 3) {
            add(r, rule, "'" + src + "' is not a bracket");
            return;
        }
        int n = static_cast<int>(args->size());
        TriDegree T{n - 2, -(n - 2), 0};
        bool wk = true;
        for (const auto& a : *args) {
            auto d = ext_deg(r, a, rule);
            if (!d) return;  // issue already recorded (or zero argument)
            T = T + d->tri;
            wk = wk && d->w_known;
        }
        if (T.s != want.s || T.f != want.f || (wk && T.w != want.w))
            add(r, rule, "bracket '" + src + "' has degree " + T.str() + ", expected " +
                             want.str());
    }

    // Matric bracket <[r1,...,rk],[c1;...;ck],x>: all r_i*c_i share one degree D
    // and the value sits at D + deg(x) + (1,-1,0).
    void check_matric(const TableRecord& r, const std::string& src, const std::string& rule,
                      const TriDegree& want) {
        auto args = split_bracket(src);
        if (!args || args->size() != 3) {
            add(r, rule, "'" + src + "' is not a threefold matric bracket");
            return;
        }
        auto entries = [&](const std::string& a) {
            std::string s = trim(a);
            if (s.size() >= 2 && s.front() == '[' && s.back() == ']')
                s = s.substr(1, s.size() - 2);
            std::vector<std::string> out;
            int d = 0;
            size_t start = 0;
            for (size_t i = 0; i < s.size(); ++i) {
                char c = s[i];
                if ((c == ',' || c == ';') && d == 0) {
                    out.push_back(trim(s.substr(start, i - start)));
                    start = i + 1;
                } else {
                    depth_step(c, d);
                }
            }
            out.push_back(trim(s.substr(start)));
            return out;
        };
        auto rows = entries((*args)[0]);
        auto cols = entries((*args)[1]);
        if (rows.size() != cols.size()) {
            add(r, rule, "row/column length mismatch in '" + src + "'");
            return;
        }
        std::optional<TriDegree> D;
        for (size_t i = 0; i < rows.size(); ++i) {
            auto a = ext_deg(r, rows[i], rule);
            auto b = ext_deg(r, cols[i], rule);
            if (!a || !b) return;
            TriDegree prod = a->tri + b->tri;
            if (!D) D = prod;
            else if (*D != prod) {
                add(r, rule, "matric bracket '" + src + "' is not degree-homogeneous");
                return;
            }
        }
        auto x = ext_deg(r, (*args)[2], rule);
        if (!D || !x) return;
        TriDegree T = *D + x->tri + TriDegree{1, -1, 0};
        if (T != want)
            add(r, rule, "matric bracket '" + src + "' has degree " + T.str() +
                             ", expected " + want.str());
    }

    // Best-effort validation of statement chunks in a description column.
    // Chunks are ';'-separated.  "dN(x) = y" chunks must satisfy the May (or
    // Adams) differential degree law; plain "x = y" chunks must be
    // degree-balanced.  Unparseable chunks are annotations and are skipped.
    void check_desc(const TableRecord& r) {
        const std::string& desc = r.description;
        if (desc.empty()) return;
        std::vector<std::string> chunks;
        int d = 0;
        size_t start = 0;
        for (size_t i = 0; i < desc.size(); ++i) {
            char c = desc[i];
            if (c == ';' && d == 0) {
                chunks.push_back(trim(desc.substr(start, i - start)));
                start = i + 1;
            } else {
                depth_step(c, d);
            }
        }
        chunks.push_back(trim(desc.substr(start)));
        for (const auto& chunk : chunks) {
            if (chunk.empty()) continue;
            // dN( lhs ) = rhs
            if (chunk.size() > 2 && chunk[0] == 'd' && is_digit(chunk[1])) {
                size_t p = 1;
                while (p < chunk.size() && is_digit(chunk[p])) ++p;
                if (p < chunk.size() && chunk[p] == '(') {
                    int page = std::stoi(chunk.substr(1, p - 1));
                    int depth = 0;
                    size_t close = std::string::npos;
                    for (size_t i = p; i < chunk.size(); ++i) {
                        if (chunk[i] == '(') ++depth;
                        else if (chunk[i] == ')' && --depth == 0) {
                            close = i;
                            break;
                        }
                    }
                    if (close == std::string::npos) continue;
                    std::string lhs = trim(chunk.substr(p + 1, close - p - 1));
                    std::string rest = trim(chunk.substr(close + 1));
                    if (rest.size() < 2 || rest[0] != '=') continue;
                    std::string rhs = trim(rest.substr(1));
                    if (skippable(rhs)) continue;
                    std::optional<DegreeInfo> a, b;
                    try {
                        a = ds.names.degree_of(lhs);
                        b = ds.names.degree_of(rhs);
                    } catch (const std::exception&) {
                        continue;  // annotation, not a checkable statement
                    }
                    if (!a || !b) continue;
                    bool may_law = b->tri.s == a->tri.s - 1 && b->tri.f == a->tri.f + 1 &&
                                   (!a->w_known || !b->w_known || b->tri.w == a->tri.w) &&
                                   (!a->m || !b->m || *b->m == *a->m - page + 1);
                    bool adams_law = b->tri.s == a->tri.s - 1 &&
                                     b->tri.f == a->tri.f + page &&
                                     (!a->w_known || !b->w_known || b->tri.w == a->tri.w);
                    if (!may_law && !adams_law)
                        add(r, "desc-differential",
                            "'" + chunk + "': d" + std::to_string(page) + " source " +
                                a->tri.str() + " vs target " + b->tri.str());
                    continue;
                }
            }
            auto st = split_statement(chunk);
            if (!st || st->rel != "=" || skippable(st->lhs) || skippable(st->rhs)) continue;
            std::optional<DegreeInfo> a, b;
            try {
                a = ds.names.degree_of(st->lhs);
                b = ds.names.degree_of(st->rhs);
            } catch (const std::exception&) {
                continue;
            }
            if (!a || !b) continue;
            if (a->tri.s != b->tri.s || a->tri.f != b->tri.f ||
                (a->w_known && b->w_known && a->tri.w != b->tri.w))
                add(r, "desc-relation", "'" + chunk + "': " + a->tri.str() + " vs " +
                                            b->tri.str());
        }
    }

    // ---- per-table dispatch ----------------------------------------------
    bool require_arity(const TableRecord& r, size_t n) {
        if (r.degree.size() == n) return true;
        add(r, "arity", "expected a " + std::to_string(n) + "-graded degree, got " +
                            degree_str(r.degree));
        return false;
    }

    void row(const TableRecord& r) {
        const std::string& t = r.table;
        static const std::map<std::string, TriDegree> ext_ops = {
            {"may_tau", {0, 0, -1}}, {"may_h0", {0, 1, 0}},
            {"may_h1", {1, 1, 1}},   {"may_h2", {3, 1, 2}},
            {"ctau_h0", {0, 1, 0}},  {"ctau_h1", {1, 1, 1}},
            {"ctau_h2", {3, 1, 2}}};

        if (t == "may_e2_gen") {
            if (!require_arity(r, 4)) return;
            MayDegree D = r.mayd();
            check_ext(r, r.name, "listed-degree", D.tri(), D.m, true);
            MayDegree tgt = may_differential_target(D, 2);
            check_ext_alts(r, r.value, "d2-degree", tgt.tri(), tgt.m, true);
            check_ext(r, r.description, "e1-rep-degree", D.tri(), D.m, true);
        } else if (t == "may_e2_reln") {
            if (!require_arity(r, 4)) return;
            MayDegree D = r.mayd();
            check_relation(r, r.name, "relation-degree", D.tri(), D.m, true);
        } else if (t == "may_d4" || t == "may_d6" || t == "may_d8" || t == "may_higher") {
            if (!require_arity(r, 4)) return;
            MayDegree D = r.mayd();
            int page = 0;
            if (t == "may_higher") {
                const std::string& tag = r.description;
                if (tag.size() > 1 && tag[0] == 'd' && all_digits(tag.substr(1))) {
                    page = std::stoi(tag.substr(1));
                } else {
                    add(r, "page-tag", "bad page tag '" + tag + "'");
                    return;
                }
            } else {
                page = t.back() - '0';
                check_ext(r, r.description, "rep-degree", D.tri(), D.m, true);
            }
            check_ext(r, r.name, "listed-degree", D.tri(), D.m, true);
            MayDegree tgt = may_differential_target(D, page);
            check_ext_alts(r, r.value, "dr-degree", tgt.tri(), tgt.m, true);
        } else if (t == "may_einfty_temp") {
            if (!require_arity(r, 4)) return;
            MayDegree D = r.mayd();
            check_ext(r, r.name, "listed-degree", D.tri(), D.m, true);
            check_ext(r, r.description, "rep-degree", D.tri(), D.m, true);
        } else if (t == "ext_ambiguous") {
            if (!require_arity(r, 4)) return;
            MayDegree D = r.mayd();
            check_ext(r, r.name, "listed-degree", D.tri(), D.m, true);
            // Alternatives agree in (s,f,w) only; May filtration may differ.
            check_ext_alts(r, r.value, "ambiguity-degree", D.tri(), std::nullopt, false);
            check_desc(r);
        } else if (ext_ops.count(t) && t.compare(0, 4, "may_") == 0) {
            if (!require_arity(r, 3)) return;
            TriDegree T = r.tri();
            TriDegree op = ext_ops.at(t);
            // Listed degree is the TARGET; the source differs by the operator
            // exactly (a hidden May extension jumps in May filtration only).
            check_relation(r, r.name, "source-degree", T - op, std::nullopt, false);
            check_ext_alts(r, r.value, "target-degree", T, std::nullopt, false);
            check_desc(r);
        } else if (t == "adams_d3" || t == "adams_d4" || t == "adams_d5") {
            if (!require_arity(r, 3)) return;
            TriDegree T = r.tri();
            int page = t.back() - '0';
            check_ext(r, r.name, "listed-degree", T, std::nullopt, false);
            check_ext_alts(r, r.value, "dr-degree", adams_differential_target(T, page),
                           std::nullopt, false);
        } else if (t == "may_misc" || t == "ctau_misc_extn") {
            if (!require_arity(r, 3)) return;
            check_relation(r, r.name, "relation-degree", r.tri(), std::nullopt, false);
        } else if (t == "notation") {
            if (!require_arity(r, 2)) return;
            auto d = ext_deg(r, r.value, "detecting-class");
            if (d && (d->tri.s != r.degree[0] || (d->w_known && d->tri.w != r.degree[1])))
                add(r, "detecting-class",
                    "'" + r.value + "' has (s,w) = (" + std::to_string(d->tri.s) + "," +
                        std::to_string(d->tri.w) + "), expected " + degree_str(r.degree));
        } else if (t == "toda") {
            if (!require_arity(r, 2)) return;
            int s = r.degree[0], w = r.degree[1];
            auto st = split_statement(r.name);
            if (st && st->rel == "=") {
                check_hbracket(r, st->lhs, "bracket-degree", s, w);
                check_hbracket(r, st->rhs, "bracket-degree", s, w);
            } else {
                check_hbracket(r, r.name, "bracket-degree", s, w);
            }
            check_hstmt(r, r.value, "value-degree", s, w);
        } else if (t == "bracket_refs") {
            if (!require_arity(r, 1)) return;
            int s = r.degree[0];
            check_hbracket(r, r.name, "bracket-degree", s, std::nullopt);
            check_hstmt(r, r.value, "value-degree", s, std::nullopt);
        } else if (t == "extn_refs") {
            if (!require_arity(r, 2)) return;
            static const std::map<std::string, std::pair<int, int>> ops = {
                {"2", {0, 1}}, {"4", {0, 2}}, {"eta", {1, 1}}, {"nu", {3, 1}},
                {"sigma", {7, 1}}};
            auto it = ops.find(r.description);
            if (it == ops.end()) {
                add(r, "multiplier", "unknown multiplier '" + r.description + "'");
                return;
            }
            int s = r.degree[0], f = r.degree[1];
            auto a = ext_deg(r, r.name, "source-degree", true);
            if (a && (a->tri.s != s || a->tri.f != f))
                add(r, "source-degree", "'" + r.name + "' has (s,f) = (" +
                                            std::to_string(a->tri.s) + "," +
                                            std::to_string(a->tri.f) + "), expected " +
                                            degree_str(r.degree));
            auto b = ext_deg(r, r.value, "target-degree", true);
            if (b) {
                if (b->tri.s != s + it->second.first)
                    add(r, "target-degree", "'" + r.value + "' has stem " +
                                                std::to_string(b->tri.s) + ", expected " +
                                                std::to_string(s + it->second.first));
                if (b->tri.f < f + it->second.second + 1)
                    add(r, "target-filtration",
                        "'" + r.value + "' has filtration " + std::to_string(b->tri.f) +
                            " < " + std::to_string(f + it->second.second + 1) +
                            " (a hidden extension must jump Adams filtration)");
            }
        } else if (t == "diff_refs") {
            if (!require_arity(r, 2)) return;
            const std::string& tag = r.description;
            if (tag.size() < 2 || tag[0] != 'd' || !all_digits(tag.substr(1))) {
                add(r, "page-tag", "bad page tag '" + tag + "'");
                return;
            }
            int page = std::stoi(tag.substr(1));
            int s = r.degree[0], f = r.degree[1];
            auto a = ext_deg(r, r.name, "source-degree", true);
            if (a && (a->tri.s != s || a->tri.f != f))
                add(r, "source-degree", "'" + r.name + "' has (s,f) = (" +
                                            std::to_string(a->tri.s) + "," +
                                            std::to_string(a->tri.f) + "), expected " +
                                            degree_str(r.degree));
            auto b = ext_deg(r, r.value, "target-degree", true);
            if (b && (b->tri.s != s - 1 || b->tri.f != f + page))
                add(r, "target-degree", "'" + r.value + "' has (s,f) = (" +
                                            std::to_string(b->tri.s) + "," +
                                            std::to_string(b->tri.f) + "), expected (" +
                                            std::to_string(s - 1) + "," +
                                            std::to_string(f + page) + ")");
        } else if (t == "ctau_e2" || t == "ctau_d3") {
            if (!require_arity(r, 3)) return;
            TriDegree T = r.tri();
            int page = (t == "ctau_d3") ? 3 : 2;
            check_ext(r, r.name, "listed-degree", T, std::nullopt, false);
            check_ext_alts(r, r.value, "dr-degree", adams_differential_target(T, page),
                           std::nullopt, false);
            check_desc(r);
        } else if (ext_ops.count(t)) {  // ctau_h0 / ctau_h1 / ctau_h2
            if (!require_arity(r, 3)) return;
            TriDegree T = r.tri();
            TriDegree op = ext_ops.at(t);
            check_ext(r, r.name, "source-degree", T, std::nullopt, false);
            check_ext_alts(r, r.value, "target-degree", T + op, std::nullopt, false);
            check_desc(r);
        } else if (t == "ctau_ambiguous") {
            if (!require_arity(r, 3)) return;
            TriDegree T = r.tri();
            check_ext(r, r.name, "listed-degree", T, std::nullopt, false);
            check_ext_alts(r, r.value, "ambiguity-degree", T, std::nullopt, false);
            check_desc(r);
        } else if (t == "ctau_top") {
            if (!require_arity(r, 3)) return;
            TriDegree T = r.tri();
            check_ext(r, r.name, "listed-degree", T, std::nullopt, false);
            auto b = ext_deg(r, r.value, "top-cell-degree");
            if (b) {
                if (b->tri.s != T.s - 1 || (b->w_known && b->tri.w != T.w + 1))
                    add(r, "top-cell-degree",
                        "'" + r.value + "' has degree " + b->tri.str() +
                            ", expected (s,w) = (" + std::to_string(T.s - 1) + ",*," +
                            std::to_string(T.w + 1) + ")");
                if (b->tri.f < T.f + 1)
                    add(r, "top-cell-filtration",
                        "'" + r.value + "' has filtration " + std::to_string(b->tri.f) +
                            " < " + std::to_string(T.f + 1));
            }
        } else if (t == "ctau_hidden") {
            if (!require_arity(r, 3)) return;
            TriDegree T = r.tri();  // TARGET degree
            static const std::map<std::string, TriDegree> hops = {
                {"2", {0, 1, 0}}, {"eta", {1, 1, 1}}, {"nu", {3, 1, 2}}};
            auto it = hops.find(r.description);
            if (it == hops.end()) {
                add(r, "multiplier", "unknown multiplier '" + r.description + "'");
                return;
            }
            const TriDegree& op = it->second;
            check_ext_alts(r, r.value, "target-degree", T, std::nullopt, false);
            auto a = ext_deg(r, r.name, "source-degree");
            if (a) {
                if (a->tri.s != T.s - op.s || (a->w_known && a->tri.w != T.w - op.w))
                    add(r, "source-degree", "'" + r.name + "' has degree " +
                                                a->tri.str() + ", expected (s,w) = (" +
                                                std::to_string(T.s - op.s) + ",*," +
                                                std::to_string(T.w - op.w) + ")");
                if (a->tri.f > T.f - op.f - 1)
                    add(r, "source-filtration",
                        "'" + r.name + "' has filtration " + std::to_string(a->tri.f) +
                            " > " + std::to_string(T.f - op.f - 1) +
                            " (a hidden extension must jump Adams filtration)");
            }
        } else if (t == "massey") {
            if (!require_arity(r, 3)) return;
            TriDegree T = r.tri();
            check_ext_bracket(r, r.name, "bracket-degree", T);
            check_ext_alts(r, r.value, "value-degree", T, std::nullopt, false);
            check_desc(r);
        } else if (t == "ctau_matric") {
            if (!require_arity(r, 3)) return;
            TriDegree T = r.tri();
            check_matric(r, r.name, "bracket-degree", T);
            check_ext_alts(r, r.value, "value-degree", T, std::nullopt, false);
            check_desc(r);
        } else if (t == "names_extra") {
            if (r.degree.size() == 4) {
                MayDegree D = r.mayd();
                check_ext(r, r.name, "listed-degree", D.tri(), D.m, true);
                if (!r.value_unknown())
                    check_ext(r, r.value, "defining-degree", D.tri(), D.m, true);
            } else if (r.degree.size() == 3) {
                check_ext(r, r.name, "listed-degree", r.tri(), std::nullopt, false);
                if (!r.value_unknown())
                    check_ext(r, r.value, "defining-degree", r.tri(), std::nullopt, false);
            } else if (r.degree.size() != 2) {
                add(r, "arity", "expected a 2-, 3- or 4-graded degree");
            }
        }
        // Unknown table stems are carried through without degree laws.
    }
};

}  // namespace

std::vector<ValidationIssue> validate_degree_arithmetic(const Dataset& ds) {
    Validator v{ds, {}};
    for (const auto& [stem, recs] : ds.tables) {
        for (const auto& r : recs) {
            try {
                v.row(r);
            } catch (const std::exception& ex) {
                v.add(r, "internal", ex.what());
            }
        }
    }
    return v.issues;
}

// ---------------------------------------------------------------------------
// Name binding.

std::map<std::string, Binding> resolve_names(const Dataset& ds, const ChartView& chart) {
    std::map<std::string, int> ambiguous;  // name -> number of alternatives
    for (const char* stem : {"ext_ambiguous", "ctau_ambiguous"}) {
        if (!ds.has_table(stem)) continue;
        for (const auto& r : ds.table(stem))
            ambiguous[r.name] =
                static_cast<int>(split_alternatives(r.value).size());
    }
    std::map<std::string, Binding> out;
    for (const auto& name : ds.names.names()) {
        if (ds.e1.find(name)) continue;  // E1 primitives are not Ext classes
        const NameEntry* e = ds.names.find(name);
        Binding b;
        b.deg = e->deg.tri();
        if (!e->w_known) {
            b.kind = BindKind::Unbound;
            b.detail = "classical-only class (no motivic weight)";
        } else if (e->deg.s > ds.max_stem || e->deg.s < 0) {
            b.kind = BindKind::Unbound;
            b.detail = "outside the stem window";
        } else if (auto it = ambiguous.find(name); it != ambiguous.end()) {
            b.kind = BindKind::Coset;
            b.coset_size = 1 + it->second;
            b.detail = "degree-coincident definitions";
        } else if (chart.dim_at && chart.dim_at(b.deg) >= 1) {
            b.kind = BindKind::Unique;
        } else {
            b.kind = BindKind::Unbound;
            b.detail = "no chart class at " + b.deg.str();
        }
        out[name] = b;
    }
    return out;
}

}  // namespace may::tab
