#include "pinnbridge/physics.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include <nlohmann/json.hpp>

#include "pinnbridge/error.hpp"

namespace pinnbridge::physics {

using ad::Tensor;
using ad::Var;

void PhysicsConstants::validate() const {
    if (!(gravity > 0.0)) fail(ErrorKind::InvalidConfig, "gravity must be positive");
    if (!(poisson_ratio > 0.0 && poisson_ratio < 0.5))
        fail(ErrorKind::InvalidConfig, "poisson_ratio must lie in (0, 0.5)");
    if (!(effective_length_factor > 0.0)) fail(ErrorKind::InvalidConfig, "effective_length_factor must be positive");
    if (!(serviceability_ratio > 0.0)) fail(ErrorKind::InvalidConfig, "serviceability_ratio must be positive");
}

MemberSection member_section(double diameter_mm) {
    if (!(diameter_mm > 0.0) || !std::isfinite(diameter_mm))
        fail(ErrorKind::InvalidGeometry, "diameter must be positive");
    const double d2 = diameter_mm * diameter_mm;
    return {std::numbers::pi * d2 / 4.0, std::numbers::pi * d2 * d2 / 64.0};
}

double weight_from_geometry(const BridgeParameters& params) {
    const auto sec = member_section(params.geometry.beam_diameter_mm);
    return density_g_mm3(params.material.density_g_cm3) * sec.area_mm2 * params.geometry.total_length_mm();
}

DerivedQuantities derived_quantities(const BridgeParameters& params, double predicted_weight_g,
                                     const PhysicsConstants& c) {
    if (!std::isfinite(predicted_weight_g)) fail(ErrorKind::NumericalError, "predicted weight is not finite");
    const auto& g = params.geometry;
    if (g.beam_count <= 0) fail(ErrorKind::InvalidGeometry, "beam_count must be positive");
    const auto sec = member_section(g.beam_diameter_mm);
    const double e = gpa_to_mpa(params.material.youngs_modulus_gpa);
    const double len = g.mean_length_mm();
    const double kl = c.effective_length_factor * len;

    DerivedQuantities q;
    q.axial_force_n = grams_to_newtons(predicted_weight_g, c.gravity) / static_cast<double>(g.beam_count);
    q.axial_stress_mpa = q.axial_force_n / sec.area_mm2;
    q.strain = q.axial_stress_mpa / e;
    q.axial_deformation_mm = q.axial_force_n * len / (sec.area_mm2 * e);
    q.shear_modulus_mpa = e / (2.0 * (1.0 + c.poisson_ratio));
    q.shear_stress_mpa = q.axial_force_n / (2.0 * sec.area_mm2);
    q.shear_strain = q.shear_stress_mpa / q.shear_modulus_mpa;
    q.buckling_load_n = std::numbers::pi * std::numbers::pi * e * sec.second_moment_mm4 / (kl * kl);
    q.midspan_deflection_mm = q.axial_force_n * len * len * len / (48.0 * e * sec.second_moment_mm4);
    q.von_mises_mpa = std::abs(q.axial_stress_mpa);
    return q;
}

const std::vector<std::string>& pikan_term_names() {
    static const std::vector<std::string> names = {
        "euler_bernoulli", "axial_stress", "axial_deformation", "shear_modulus",
        "von_mises",       "hooke",        "shear_stress_strain", "euler_buckling",
    };
    return names;
}

const std::vector<std::string>& pinn_term_names() {
    static const std::vector<std::string> names = {"weight", "stress", "equilibrium"};
    return names;
}

std::vector<std::pair<std::string, double>> PhysicsResiduals::pikan_terms() const {
    return {{"euler_bernoulli", euler_bernoulli}, {"axial_stress", axial_stress},
            {"axial_deformation", axial_deformation}, {"shear_modulus", shear_modulus},
            {"von_mises", von_mises}, {"hooke", hooke},
            {"shear_stress_strain", shear_stress_strain}, {"euler_buckling", euler_buckling}};
}

std::vector<std::pair<std::string, double>> PhysicsResiduals::pinn_terms() const {
    return {{"weight", weight}, {"stress", stress}, {"equilibrium", equilibrium}};
}

std::vector<std::pair<std::string, double>> PhysicsResiduals::all_terms() const {
    auto out = pikan_terms();
    for (auto& t : pinn_terms()) out.push_back(t);
    return out;
}

namespace {

// Per-sample constants laid out as (batch x 1) columns.
struct BatchConstants {
    Tensor force_per_gram;      // g * 1e-3 / N   [N / g]
    Tensor inv_area;            // 1 / A
    Tensor inv_e;               // 1 / E
    Tensor e;                   // E [MPa]
    Tensor deform_coeff;        // L / (A E)
    Tensor shear_modulus;       // G
    Tensor theory_shear_modulus;  // E / (2 (1 + nu)), evaluated independently of G's storage
    Tensor inv_two_area;        // 1 / (2 A)
    Tensor inv_g;               // 1 / G
    Tensor buckling;            // P_cr
    Tensor deflection_coeff;    // L^3 / (48 E I)
    Tensor deflection_limit;    // L / serviceability_ratio
    Tensor yield;               // sigma_y
    Tensor geometric_weight;    // weight_from_geometry
    Tensor load_per_gram;       // g * 1e-3
    Tensor vertical_coeff;      // N sin(theta)
};

BatchConstants batch_constants(std::span<const BridgeParameters> batch, const PhysicsConstants& c) {
    c.validate();
    const std::size_t n = batch.size();
    auto col = [n] { return Tensor::zeros(n, 1); };
    BatchConstants k{col(), col(), col(), col(), col(), col(), col(), col(),
                     col(), col(), col(), col(), col(), col(), col(), col()};
    for (std::size_t i = 0; i < n; ++i) {
        const auto& p = batch[i];
        const auto& g = p.geometry;
        if (g.beam_count <= 0) fail(ErrorKind::InvalidGeometry, "beam_count must be positive");
        const auto sec = member_section(g.beam_diameter_mm);
        const double e = gpa_to_mpa(p.material.youngs_modulus_gpa);
        const double len = g.mean_length_mm();
        const double kl = c.effective_length_factor * len;
        const double count = static_cast<double>(g.beam_count);
        const double shear = e / (2.0 * (1.0 + c.poisson_ratio));
        k.force_per_gram[i] = grams_to_newtons(1.0, c.gravity) / count;
        k.inv_area[i] = 1.0 / sec.area_mm2;
        k.inv_e[i] = 1.0 / e;
        k.e[i] = e;
        k.deform_coeff[i] = len / (sec.area_mm2 * e);
        k.shear_modulus[i] = shear;
        k.theory_shear_modulus[i] = e / (2.0 * (1.0 + c.poisson_ratio));
        k.inv_two_area[i] = 1.0 / (2.0 * sec.area_mm2);
        k.inv_g[i] = 1.0 / shear;
        k.buckling[i] = std::numbers::pi * std::numbers::pi * e * sec.second_moment_mm4 / (kl * kl);
        k.deflection_coeff[i] = len * len * len / (48.0 * e * sec.second_moment_mm4);
        k.deflection_limit[i] = len / c.serviceability_ratio;
        k.yield[i] = p.material.yield_strength_mpa;
        k.geometric_weight[i] = weight_from_geometry(p);
        k.load_per_gram[i] = grams_to_newtons(1.0, c.gravity);
        k.vertical_coeff[i] = count * std::sin(g.mean_angle_deg * std::numbers::pi / 180.0);
    }
    return k;
}

void check_batch(Var predicted, std::size_t n) {
    const auto& v = predicted.value();
    if (n == 0) fail(ErrorKind::BatchShapeError, "empty physics batch");
    if (v.rank() != 2 || v.cols() != 1 || v.rows() != n)
        fail(ErrorKind::BatchShapeError, "predictions " + v.shape_string() + " do not match batch of " +
                                             std::to_string(n));
}

Var times(Var x, const Tensor& c) { return ad::mul(x, x.tape().constant(c)); }
Var minus(Var x, const Tensor& c) { return ad::sub(x, x.tape().constant(c)); }
Var mean_sq(Var x) { return ad::mean(ad::square(x)); }

}  // namespace

PhysicsLoss pinn_physics_loss(Var predicted, std::span<const BridgeParameters> batch, const PhysicsConstants& c) {
    check_batch(predicted, batch.size());
    const auto k = batch_constants(batch, c);
    auto& tape = predicted.tape();

    Var l_weight = mean_sq(minus(predicted, k.geometric_weight));

    Var force = times(predicted, k.force_per_gram);
    Var stress = times(force, k.inv_area);
    Var l_stress = mean_sq(ad::hinge(minus(stress, k.yield)));

    Var negativity = mean_sq(ad::hinge(ad::scale(predicted, -1.0)));
    Var imbalance = ad::sub(times(predicted, k.load_per_gram), times(force, k.vertical_coeff));
    Var l_equilibrium = ad::add(negativity, mean_sq(imbalance));

    PhysicsLoss out;
    out.total = ad::add(ad::add(l_weight, l_stress), l_equilibrium);
    out.residuals.weight = tape.value(l_weight).item();
    out.residuals.stress = tape.value(l_stress).item();
    out.residuals.equilibrium = tape.value(l_equilibrium).item();
    return out;
}

PhysicsLoss pikan_physics_loss(Var predicted, std::span<const BridgeParameters> batch, const PhysicsConstants& c) {
    check_batch(predicted, batch.size());
    const auto k = batch_constants(batch, c);
    auto& tape = predicted.tape();

    Var force = times(predicted, k.force_per_gram);
    Var stress = times(force, k.inv_area);
    Var strain = times(stress, k.inv_e);
    Var deformation = times(force, k.deform_coeff);
    Var shear_stress = times(force, k.inv_two_area);
    Var shear_strain = times(shear_stress, k.inv_g);
    Var deflection = times(force, k.deflection_coeff);
    Var von_mises_stress = ad::abs(stress);
    Var shear_mod = tape.constant(k.shear_modulus);

    // Consistency terms. (sigma - E eps)^2 is evaluated as E^2 (eps - sigma/E)^2 and
    // (tau - G gamma)^2 as G^2 (gamma - tau/G)^2 so they vanish exactly when consistent.
    Var hooke = mean_sq(times(ad::sub(strain, times(stress, k.inv_e)), k.e));
    Var shear_ss = mean_sq(times(ad::sub(shear_strain, times(shear_stress, k.inv_g)), k.shear_modulus));
    Var shear_modulus = mean_sq(minus(shear_mod, k.theory_shear_modulus));
    Var axial_stress = mean_sq(ad::sub(stress, times(force, k.inv_area)));
    Var axial_deformation = mean_sq(ad::sub(deformation, times(force, k.deform_coeff)));

    // Feasibility hinges.
    Var von_mises = mean_sq(ad::hinge(minus(von_mises_stress, k.yield)));
    Var buckling = mean_sq(ad::hinge(minus(force, k.buckling)));
    Var bernoulli = mean_sq(ad::hinge(minus(deflection, k.deflection_limit)));

    const Var terms[] = {bernoulli, axial_stress, axial_deformation, shear_modulus,
                         von_mises, hooke, shear_ss, buckling};
    Var total = terms[0];
    for (std::size_t i = 1; i < std::size(terms); ++i) total = ad::add(total, terms[i]);

    PhysicsLoss out;
    out.total = total;
    auto& r = out.residuals;
    r.euler_bernoulli = tape.value(bernoulli).item();
    r.axial_stress = tape.value(axial_stress).item();
    r.axial_deformation = tape.value(axial_deformation).item();
    r.shear_modulus = tape.value(shear_modulus).item();
    r.von_mises = tape.value(von_mises).item();
    r.hooke = tape.value(hooke).item();
    r.shear_stress_strain = tape.value(shear_ss).item();
    r.euler_buckling = tape.value(buckling).item();
    return out;
}

namespace {

template <typename LossFn>
PhysicsLossValue evaluate_scalar(std::span<const BridgeParameters> batch, std::span<const double> predicted,
                                 const PhysicsConstants& c, LossFn fn) {
    if (batch.size() != predicted.size())
        fail(ErrorKind::BatchShapeError, "batch of " + std::to_string(batch.size()) + " vs " +
                                             std::to_string(predicted.size()) + " predictions");
    ad::Tape tape;
    Var p = tape.variable(Tensor::column(std::vector<double>(predicted.begin(), predicted.end())));
    auto loss = fn(p, batch, c);
    PhysicsLossValue out;
    out.total = loss.total.value().item();
    out.residuals = loss.residuals;
    tape.backward(loss.total);
    const auto g = tape.grad(p);
    out.gradient.assign(g.values().begin(), g.values().end());
    return out;
}

}  // namespace

PhysicsLossValue pinn_physics_loss(std::span<const BridgeParameters> batch, std::span<const double> predicted,
                                   const PhysicsConstants& c) {
    return evaluate_scalar(batch, predicted, c,
                           [](Var p, std::span<const BridgeParameters> b, const PhysicsConstants& cc) {
                               return pinn_physics_loss(p, b, cc);
                           });
}

PhysicsLossValue pikan_physics_loss(std::span<const BridgeParameters> batch, std::span<const double> predicted,
                                    const PhysicsConstants& c) {
    return evaluate_scalar(batch, predicted, c,
                           [](Var p, std::span<const BridgeParameters> b, const PhysicsConstants& cc) {
                               return pikan_physics_loss(p, b, cc);
                           });
}

std::string residuals_to_json(const PhysicsResiduals& r) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [name, value] : r.all_terms()) j[name] = value;
    return j.dump();
}

std::string residuals_to_csv(const PhysicsResiduals& r) {
    std::ostringstream os;
    os.precision(17);
    os << "constraint,value\n";
    for (const auto& [name, value] : r.all_terms()) os << name << ',' << value << '\n';
    return os.str();
}

}  // namespace pinnbridge::physics
