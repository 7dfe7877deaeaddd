#pragma once
// The May E1-page: polynomial algebra over F2[tau] on the generators h_{ij},
// monomial enumeration per degree, multiplication, and the d1 differential.
// The same machinery (Registry / Monomial / Element) also carries the named
// E2-page generators, so Elements are the universal value type for
// differentials, products and brackets.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mayengine/grading.hpp"

namespace may::alg {

struct GeneratorInfo {
    std::string name;
    MayDegree deg;
    enum Kind { E1Primitive, PageGenerator } kind = E1Primitive;
    int i = 0, j = 0;  // h_{ij} indices; meaningful for E1 primitives only
};

// A fixed, ordered generator set.  Built once, then read-only.
class Registry {
  public:
    // E1 registry: all h_{ij} with stem <= max_stem (i >= 1, j >= 0).
    // h_{i0} has degree (i, 2^i-2, 1, 2^{i-1}-1);
    // h_{ij}, j>0, has degree (i, 2^j(2^i-1)-1, 1, 2^{j-1}(2^i-1)).
    static Registry e1(int max_stem, bool classical = false);
    // Empty registry to be filled by tables_io (named page generators).
    Registry() = default;

    int add(GeneratorInfo g);  // returns index; rejects duplicate names
    int size() const { return (int)gens_.size(); }
    const GeneratorInfo& info(int idx) const { return gens_[idx]; }
    std::optional<int> find(const std::string& name) const;
    bool classical() const { return classical_; }
    void set_classical(bool c) { classical_ = c; }

  private:
    std::vector<GeneratorInfo> gens_;
    std::map<std::string, int> index_;
    bool classical_ = false;
};

// tau^tau_exp * prod_i gen_i^{e[i]} over a fixed registry.
struct Monomial {
    int tau_exp = 0;
    std::vector<uint8_t> e;  // fixed width = registry size

    static Monomial one(const Registry& reg) { return Monomial{0, std::vector<uint8_t>(reg.size())}; }
    bool is_unit() const;
    MayDegree degree(const Registry& reg) const;
    int may_filtration(const Registry& reg) const;  // the m component
    Monomial times(const Monomial& o) const;
    Monomial tau_free() const {  // forget the tau power
        return Monomial{0, e};
    }
    // Graded-lex order: May filtration m, then exponent vector, then tau.
    // Needs the registry for m; exposed as a comparator factory.
    friend bool operator==(const Monomial&, const Monomial&) = default;
    friend auto operator<=>(const Monomial& a, const Monomial& b) {
        if (auto c = a.e <=> b.e; c != 0) return c;
        return a.tau_exp <=> b.tau_exp;
    }
    std::string str(const Registry& reg) const;
};

// F2-linear combination of monomials (duplicates cancel in pairs).
struct Element {
    std::vector<Monomial> ms;  // sorted, unique

    static Element zero() { return {}; }
    static Element from(Monomial m) { return Element{{std::move(m)}}; }
    bool is_zero() const { return ms.empty(); }
    Element operator+(const Element& o) const;  // XOR of monomial sets
    Element times(const Element& o) const;
    Element times_tau(int k) const;
    // Homogeneous degree; nullopt for zero; throws on inhomogeneous input.
    std::optional<MayDegree> degree(const Registry& reg) const;
    // Minimal May filtration among the monomials (detection filtration).
    int min_may_filtration(const Registry& reg) const;
    friend bool operator==(const Element&, const Element&) = default;
    std::string str(const Registry& reg) const;
};

// All monomials of exactly the given degree (complete, duplicate-free,
// deterministically ordered).  With tau_free set, only tau-exponent-0
// monomials — the F2[tau]-module generators of the degree's slice.
// Throws std::out_of_range("window-exceeded...") when the degree leaves the
// configured window.
std::vector<Monomial> enumerate_monomials(const Registry& reg, const MayDegree& deg,
                                          bool tau_free, int max_stem);
// Tri-graded variant: any May filtration.
std::vector<Monomial> enumerate_monomials(const Registry& reg, const TriDegree& deg,
                                          bool tau_free, int max_stem);

// d1(h_{ij}) = sum_{0<k<i} h_{kj} h_{i-k,k+j}, extended as a derivation,
// tau-linearly.  Input must be homogeneous and expressed in E1 primitives.
Element d1(const Registry& reg, const Element& e);

Element multiply(const Element& a, const Element& b);

}  // namespace may::alg
