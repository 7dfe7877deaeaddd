#pragma once
// Curated-table I/O: the line-oriented `!v1` format, the value-expression
// grammar, the name registry (generators plus derived/atom names), and the
// degree-arithmetic validator that every data file must pass.
//
// Line format:   name | (d1,...,dk) | value-expression | description | provenance
// Degree tuples have 2, 3 or 4 entries depending on the table:
//   4 = (m,s,f,w) May degree, 3 = (s,f,w) Ext degree,
//   2 = (s,w) homotopy degree (notation/toda), (s,f) classical (refs tables),
//   or a bare (stem) for bracket_refs.
// `#` starts a comment, blank lines are skipped, `?` marks an unknown value.
// Trailing empty cells are dropped in canonical form.

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mayengine/algebra.hpp"
#include "mayengine/grading.hpp"

namespace may::tab {

struct TableRecord {
    std::string table;        // file stem, e.g. "may_e2_gen"
    int line_no = 0;
    std::string name;         // first column (element, relation or bracket)
    std::vector<int> degree;  // 2, 3 or 4 integers
    std::string value;        // raw value-expression ("" or "?" when absent/unknown)
    std::string description;  // raw description expression or free text
    std::string provenance;
    bool value_unknown() const { return value == "?" || value.empty(); }

    TriDegree tri() const;    // requires 3 entries
    MayDegree mayd() const;   // requires 4 entries
};

// A parsed file: the header comments (verbatim lines starting with '#') plus
// the records.  serialize() reproduces the canonical byte form.
struct TableFile {
    std::string stem;
    std::vector<std::string> comments;  // verbatim, including the leading '#'
    std::vector<TableRecord> records;
};

TableFile parse_table_file(const std::filesystem::path& file);
std::string serialize_table_file(const TableFile& tf);

// Parses one `!v1` file (records only).  Throws std::runtime_error with
// file/line context on malformed input (bad header, arity, degree syntax).
std::vector<TableRecord> load_table(const std::filesystem::path& file);

// ---------------------------------------------------------------------------
// Expression grammar:  expr    := term ('+' term)*
//                      term    := factor ('*' factor)*
//                      factor  := primary ('^' int)?
//                      primary := 'tau' | int | name | 'bar' '(' expr ')'
//                               | '{' expr '}' | '(' expr ')'
// Names are [A-Za-z][A-Za-z0-9.]* with optional primes and an optional index
// list in parens (h0(1), h0(1,2), g2', theta4.5).  "0" denotes zero.
// bar(x) is the top-cell shift (degree +(1,-1,-1)); {x} is the set of homotopy
// classes detected by the Ext class x (same (s,w)); integers have degree 0.
// Composite primaries are kept as atomic factor names ("bar(...)", "{...}",
// "(...)") and re-parsed on demand by degree_of/resolve.
struct ParsedTerm {
    int tau_exp = 0;
    std::vector<std::pair<std::string, int>> factors;  // (atom name, exponent)
};
struct ParsedExpr {
    std::vector<ParsedTerm> terms;  // empty = zero
};
ParsedExpr parse_expression(const std::string& src);  // throws std::runtime_error

// Splits a cell on top-level commas (alternative values) or a top-level
// relation keyword; nesting inside (), {}, [], <> is respected.
std::vector<std::string> split_alternatives(const std::string& cell);
// Relation statement "lhs REL rhs" with REL in {=, in, subset, intersects,
// contains}; lhs may be empty ("subset {h5*c1}").
struct Statement {
    std::string lhs, rel, rhs;
};
std::optional<Statement> split_statement(const std::string& cell);
// Bracket "<a1,...,an>" or matric "<[r1,...],[c1;...],x>": top-level arguments.
std::optional<std::vector<std::string>> split_bracket(const std::string& src);

// ---------------------------------------------------------------------------
// Name resolution.  Every atom has a degree; most also expand to a polynomial
// in the engine's E2 generators (degree-only atoms do not).  The May
// filtration m (and, for classical-only names, the weight w) may be unknown.
struct NameEntry {
    std::string name;
    MayDegree deg;
    bool m_known = true;
    bool w_known = true;
    std::optional<alg::Element> poly;  // over the E2 registry; nullopt = degree-only
};

// Degree of an expression: the (s,f,w) part plus the May filtration when every
// atom's m is known.
struct DegreeInfo {
    TriDegree tri;
    std::optional<int> m;
    bool w_known = true;
};

class NameTable {
  public:
    void add(NameEntry e);  // rejects duplicates
    const NameEntry* find(const std::string& name) const;
    // Degree of a homogeneous expression (throws on mixed (s,f) degrees or
    // unknown atoms; w/m homogeneity enforced only where known).
    // nullopt for the zero expression.
    std::optional<DegreeInfo> degree_of(const ParsedExpr& e, bool classical = false) const;
    std::optional<DegreeInfo> degree_of(const std::string& src, bool classical = false) const;
    // Expand to a polynomial over the E2 registry; nullopt when any atom is
    // degree-only.
    std::optional<alg::Element> resolve(const ParsedExpr& e, const alg::Registry& reg) const;
    std::vector<std::string> names() const;

  private:
    std::map<std::string, NameEntry> entries_;
};

// ---------------------------------------------------------------------------
// The loaded dataset: all tables of a data directory plus the E2 generator
// registry and the fully populated name table.
struct Dataset {
    std::filesystem::path dir;
    std::map<std::string, std::vector<TableRecord>> tables;   // by file stem
    std::map<std::string, std::vector<std::string>> comments; // header comments
    alg::Registry e1;         // h_{ij}, stem window
    alg::Registry e2;         // named E2 generators from may_e2_gen
    NameTable names;          // E2 gens + E1 primitives + derived/degree-only atoms
    std::map<std::string, std::pair<int, int>> homotopy;      // notation names -> (s,w)
    std::map<std::string, alg::Element> d2;  // d2 values by E2 generator name
    int max_stem = 47;
    bool classical = false;

    const std::vector<TableRecord>& table(const std::string& stem) const;
    bool has_table(const std::string& stem) const { return tables.count(stem) != 0; }
};

// Loads every *.txt table in `dir`, builds the registries (window max_stem)
// and the name table.  Throws on parse errors or name clashes.
Dataset load_dataset(const std::filesystem::path& dir, int max_stem = 47,
                     bool classical = false);

// Resolve the directory: explicit path if nonempty, else $MAYENGINE_DATA,
// else the baked-in default.
std::filesystem::path resolve_data_dir(const std::string& cli_flag);

// ---------------------------------------------------------------------------
// Validation.  Each finding names the file, line and rule that failed.
struct ValidationIssue {
    std::string file;
    int line_no = 0;
    std::string rule;
    std::string detail;
};
// Degree-arithmetic validation of every table in the dataset: expressions are
// homogeneous, listed degrees match recomputed degrees, differential, hidden
// extension, bracket and top-cell degree laws hold.  Empty result = pass.
std::vector<ValidationIssue> validate_degree_arithmetic(const Dataset& ds);

// ---------------------------------------------------------------------------
// Binding of table names to chart classes.
struct ChartView {
    // Dimension of the chart slice at an Ext degree (free rank + torsion count).
    std::function<int(const TriDegree&)> dim_at;
};
enum class BindKind { Unique, Coset, Unbound };
struct Binding {
    BindKind kind = BindKind::Unbound;
    TriDegree deg{};
    int coset_size = 1;   // > 1 for ambiguous names
    std::string detail;
};
// Total: every named Ext element of the dataset ends bound, coset-bound or
// explicitly unbound (outside the window or missing from the chart).
std::map<std::string, Binding> resolve_names(const Dataset& ds, const ChartView& chart);

}  // namespace may::tab
