#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mayengine/tables.hpp"

using namespace may;
using namespace may::tab;
namespace fs = std::filesystem;

static fs::path data_dir() { return fs::path(MAYENGINE_DATA_DIR); }

static fs::path write_temp(const std::string& name, const std::string& content) {
    fs::path p = fs::temp_directory_path() / name;
    std::ofstream out(p);
    out << content;
    return p;
}

static const Dataset& dataset() {
    static Dataset ds = load_dataset(data_dir(), 70);
    return ds;
}

TEST_CASE("parse a May-E2-gen row") {
    auto p = write_temp("tt_gen.txt",
                        "!v1\n# comment\nb20 | (4,4,2,2) | tau*h1^3 + h0^2*h2 | h20^2\n");
    auto recs = load_table(p);
    REQUIRE(recs.size() == 1);
    CHECK(recs[0].name == "b20");
    CHECK(recs[0].degree == std::vector<int>{4, 4, 2, 2});
    CHECK(recs[0].value == "tau*h1^3 + h0^2*h2");
    CHECK(recs[0].description == "h20^2");
    CHECK(recs[0].mayd() == MayDegree{4, 4, 2, 2});
    CHECK(!recs[0].value_unknown());
}

TEST_CASE("empty file and malformed input") {
    auto p = write_temp("tt_empty.txt", "!v1\n# nothing\n");
    CHECK(load_table(p).empty());
    auto q = write_temp("tt_nohdr.txt", "b20 | (4,4,2,2)\n");
    CHECK_THROWS(load_table(q));
    auto r = write_temp("tt_baddeg.txt", "!v1\nb20 | (4,x,2,2)\n");
    CHECK_THROWS(load_table(r));
}

TEST_CASE("serialize(parse(file)) is byte-identical for every shipped file") {
    int n = 0;
    for (const auto& entry : fs::directory_iterator(data_dir())) {
        if (entry.path().extension() != ".txt") continue;
        ++n;
        std::ifstream in(entry.path());
        std::stringstream ss;
        ss << in.rdbuf();
        TableFile tf = parse_table_file(entry.path());
        INFO(entry.path().filename().string());
        CHECK(serialize_table_file(tf) == ss.str());
    }
    CHECK(n >= 33);
}

TEST_CASE("serialization canonicalizes whitespace") {
    auto p = write_temp("tt_ws.txt",
                        "!v1\nb20 |  (4,4,2,2)|   tau*h1^3  + h0^2*h2 | h20^2 |  \n");
    TableFile tf = parse_table_file(p);
    CHECK(serialize_table_file(tf) ==
          "!v1\nb20 | (4,4,2,2) | tau*h1^3 + h0^2*h2 | h20^2\n");
}

TEST_CASE("expression grammar") {
    auto e = parse_expression("tau*h1^3+h0^2*h2");
    REQUIRE(e.terms.size() == 2);
    CHECK(e.terms[0].tau_exp == 1);
    CHECK(e.terms[0].factors == std::vector<std::pair<std::string, int>>{{"h1", 3}});
    CHECK(e.terms[1].factors ==
          std::vector<std::pair<std::string, int>>{{"h0", 2}, {"h2", 1}});

    auto b = parse_expression("P^2*bar(h1^2*e0)+d0*{c0}");
    REQUIRE(b.terms.size() == 2);
    CHECK(b.terms[0].factors[1].first == "bar(h1^2*e0)");
    CHECK(b.terms[1].factors[1].first == "{c0}");

    CHECK(parse_expression("0").terms.empty());
    CHECK(parse_expression("").terms.empty());
    CHECK(parse_expression("h0(1)^2").terms[0].factors[0] ==
          std::pair<std::string, int>{"h0(1)", 2});
    CHECK_THROWS(parse_expression("h1 + "));
    CHECK_THROWS(parse_expression("h1 h2"));
}

TEST_CASE("cell splitting helpers") {
    CHECK(split_alternatives("B2, B2+h0^2*h5*e0") ==
          std::vector<std::string>{"B2", "B2+h0^2*h5*e0"});
    CHECK(split_alternatives("{2*nu,6*nu}") == std::vector<std::string>{"{2*nu,6*nu}"});
    CHECK(split_alternatives("").empty());

    auto st = split_statement("c0*G3 = P*h1^3*h5*e0");
    REQUIRE(st);
    CHECK(st->lhs == "c0*G3");
    CHECK(st->rel == "=");
    CHECK(st->rhs == "P*h1^3*h5*e0");
    auto st2 = split_statement("subset {h5*c1}");
    REQUIRE(st2);
    CHECK(st2->lhs.empty());
    CHECK(st2->rel == "subset");
    CHECK(!split_statement("tau*h1^2"));

    auto br = split_bracket("<[h1^2,d0],[c0*d0;h1^2*c0],tau>");
    REQUIRE(br);
    REQUIRE(br->size() == 3);
    CHECK((*br)[0] == "[h1^2,d0]");
    CHECK((*br)[2] == "tau");
    auto br2 = split_bracket("<2,8*sigma,2,sigma^2>");
    REQUIRE(br2);
    CHECK(br2->size() == 4);
    CHECK(!split_bracket("h1*h3"));
}

TEST_CASE("dataset loads and the name table knows its degrees") {
    const Dataset& ds = dataset();
    CHECK(ds.tables.size() >= 33);
    CHECK(ds.e2.find("b20").has_value());
    CHECK(ds.e2.find("h0(1)").has_value());

    // May-E4 row: nu at (7,15,3,8) with d4(nu) = h0^2*h3^2 at (4,14,4,8).
    auto nu = ds.names.degree_of("nu");
    REQUIRE(nu);
    CHECK(nu->tri == TriDegree{15, 3, 8});
    CHECK(nu->m == 7);
    auto tgt = ds.names.degree_of("h0^2*h3^2");
    REQUIRE(tgt);
    CHECK(tgt->tri == TriDegree{14, 4, 8});
    CHECK(tgt->m == 4);
    CHECK(may_differential_target(MayDegree{7, 15, 3, 8}, 4) == MayDegree{4, 14, 4, 8});

    // May-tau row: target P*h5*d0 at (53,9,28); source B8 one weight higher.
    auto b8 = ds.names.degree_of("B8");
    REQUIRE(b8);
    CHECK(b8->tri == TriDegree{53, 9, 29});
    auto ph5d0 = ds.names.degree_of("P*h5*d0");
    REQUIRE(ph5d0);
    CHECK(ph5d0->tri == TriDegree{53, 9, 28});

    // bar shift and class braces.
    auto bar = ds.names.degree_of("bar(h1^2*e0)");
    REQUIRE(bar);
    CHECK(bar->tri == TriDegree{20, 5, 11});
    CHECK(!bar->m);

    // Inhomogeneous expressions are rejected.
    CHECK_THROWS(ds.names.degree_of("h1+h2"));
    CHECK_THROWS(ds.names.degree_of("nonexistent_atom_xyz"));
}

TEST_CASE("d2 map resolves over the E2 registry") {
    const Dataset& ds = dataset();
    REQUIRE(ds.d2.count("b20"));
    auto want = ds.names.resolve(parse_expression("tau*h1^3+h0^2*h2"), ds.e2);
    REQUIRE(want);
    CHECK(ds.d2.at("b20") == *want);
    auto deg = ds.d2.at("b20").degree(ds.e2);
    REQUIRE(deg);
    CHECK(*deg == MayDegree{3, 3, 3, 2});
    CHECK(!ds.d2.count("h0"));  // d2(h0) = 0 is not stored
}

TEST_CASE("every shipped table row passes validate_degree_arithmetic") {
    const Dataset& ds = dataset();
    auto issues = validate_degree_arithmetic(ds);
    for (const auto& i : issues) {
        CAPTURE(i.file);
        CAPTURE(i.line_no);
        CAPTURE(i.rule);
        CHECK_MESSAGE(false, i.file, ":", i.line_no, " [", i.rule, "] ", i.detail);
    }
    CHECK(issues.empty());
}

TEST_CASE("perturbed degree is flagged") {
    Dataset ds = load_dataset(data_dir(), 70);
    for (auto& r : ds.tables.at("may_e2_gen")) {
        if (r.name == "b20") r.degree = {4, 4, 2, 3};  // weight off by one
    }
    auto issues = validate_degree_arithmetic(ds);
    bool flagged = false;
    for (const auto& i : issues)
        if (i.file == "may_e2_gen.txt" && i.detail.find("b20") != std::string::npos)
            flagged = true;
    CHECK(flagged);
}

TEST_CASE("corrupted row is flagged") {
    Dataset ds = load_dataset(data_dir(), 70);
    TableRecord bad;
    bad.table = "may_d4";
    bad.line_no = 999;
    bad.name = "g";
    bad.degree = {8, 20, 4, 12};
    bad.value = "h1^4*h5";  // d4(g) = h1^4*h4 is correct; h5 is not
    ds.tables.at("may_d4").push_back(bad);
    auto issues = validate_degree_arithmetic(ds);
    bool flagged = false;
    for (const auto& i : issues)
        if (i.file == "may_d4.txt" && i.line_no == 999) flagged = true;
    CHECK(flagged);
}

TEST_CASE("resolve_names bindings") {
    const Dataset& ds = dataset();
    ChartView chart;
    chart.dim_at = [](const TriDegree&) { return 1; };
    auto bind = resolve_names(ds, chart);

    REQUIRE(bind.count("b20"));
    CHECK(bind.at("b20").kind == BindKind::Unique);
    CHECK(bind.at("b20").deg == TriDegree{4, 2, 2});

    // f0 at (18,4,10) has the tau*h1^3*h4 ambiguity: a 2-element coset.
    REQUIRE(bind.count("f0"));
    CHECK(bind.at("f0").kind == BindKind::Coset);
    CHECK(bind.at("f0").coset_size == 2);

    // p is classical-only: no motivic weight, hence unbound.
    REQUIRE(bind.count("p"));
    CHECK(bind.at("p").kind == BindKind::Unbound);

    // E1 primitives are not Ext classes and do not appear.
    CHECK(!bind.count("h20"));

    // Empty chart: named classes are explicitly unbound, never dropped.
    ChartView empty;
    empty.dim_at = [](const TriDegree&) { return 0; };
    auto bind2 = resolve_names(ds, empty);
    CHECK(bind2.size() == bind.size());
    CHECK(bind2.at("b20").kind == BindKind::Unbound);

    // Out-of-window names are unbound.
    Dataset small = load_dataset(data_dir(), 20);
    auto bind3 = resolve_names(small, chart);
    CHECK(bind3.at("g2").kind == BindKind::Unbound);  // stem 44 > 20
    CHECK(bind3.at("g").kind == BindKind::Unique);    // stem 20 in window
}

TEST_CASE("resolve_data_dir precedence") {
    CHECK(resolve_data_dir("/explicit/dir") == fs::path("/explicit/dir"));
    setenv("MAYENGINE_DATA", "/from/env", 1);
    CHECK(resolve_data_dir("") == fs::path("/from/env"));
    unsetenv("MAYENGINE_DATA");
    CHECK(!resolve_data_dir("").empty());
}
