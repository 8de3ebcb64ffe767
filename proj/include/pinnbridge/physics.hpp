#pragma once

#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pinnbridge/autodiff.hpp"
#include "pinnbridge/core.hpp"

namespace pinnbridge::physics {

// Internal unit system is N, mm, MPa (N/mm^2).
struct PhysicsConstants {
    double gravity = 9.81;               // m/s^2
    double poisson_ratio = 0.3;
    double effective_length_factor = 1.0;
    double serviceability_ratio = 240.0;  // deflection limit L / ratio

    void validate() const;
};

struct MemberSection {
    double area_mm2 = 0.0;
    double second_moment_mm4 = 0.0;
};

MemberSection member_section(double diameter_mm);

inline double gpa_to_mpa(double gpa) { return gpa * 1000.0; }
inline double mpa_to_gpa(double mpa) { return mpa / 1000.0; }
// g/cm^3 -> g/mm^3
inline double density_g_mm3(double g_cm3) { return g_cm3 * 1e-3; }
// grams of mass -> newtons of weight
inline double grams_to_newtons(double grams, double gravity) { return grams * 1e-3 * gravity; }

// Volumetric strand mass: density * A * total length, in grams.
double weight_from_geometry(const BridgeParameters& params);

struct DerivedQuantities {
    double axial_force_n = 0.0;       // F, per member under uniform load sharing
    double axial_stress_mpa = 0.0;    // sigma = F / A
    double strain = 0.0;              // epsilon = sigma / E
    double axial_deformation_mm = 0.0;  // delta = F L / (A E)
    double shear_modulus_mpa = 0.0;   // G = E / (2 (1 + nu))
    double shear_stress_mpa = 0.0;    // tau = F / (2 A)
    double shear_strain = 0.0;        // gamma = tau / G
    double buckling_load_n = 0.0;     // P_cr = pi^2 E I / (K L)^2
    double midspan_deflection_mm = 0.0;  // F L^3 / (48 E I)
    double von_mises_mpa = 0.0;       // |sigma| (uniaxial)
};

DerivedQuantities derived_quantities(const BridgeParameters& params, double predicted_weight_g,
                                     const PhysicsConstants& c = {});

struct PhysicsResiduals {
    // PIKAN constraint means
    double euler_bernoulli = 0.0;
    double axial_stress = 0.0;
    double axial_deformation = 0.0;
    double shear_modulus = 0.0;
    double von_mises = 0.0;
    double hooke = 0.0;
    double shear_stress_strain = 0.0;
    double euler_buckling = 0.0;
    // PINN terms
    double weight = 0.0;
    double stress = 0.0;
    double equilibrium = 0.0;

    std::vector<std::pair<std::string, double>> pikan_terms() const;
    std::vector<std::pair<std::string, double>> pinn_terms() const;
    std::vector<std::pair<std::string, double>> all_terms() const;
};

const std::vector<std::string>& pikan_term_names();
const std::vector<std::string>& pinn_term_names();

struct PhysicsLoss {
    ad::Var total;
    PhysicsResiduals residuals;
};

// Tape versions: `predicted` is a (batch x 1) node of weights in grams.
PhysicsLoss pinn_physics_loss(ad::Var predicted, std::span<const BridgeParameters> batch,
                              const PhysicsConstants& c = {});
PhysicsLoss pikan_physics_loss(ad::Var predicted, std::span<const BridgeParameters> batch,
                               const PhysicsConstants& c = {});

struct PhysicsLossValue {
    double total = 0.0;
    PhysicsResiduals residuals;
    std::vector<double> gradient;  // d total / d predicted_i
};

PhysicsLossValue pinn_physics_loss(std::span<const BridgeParameters> batch,
                                   std::span<const double> predicted, const PhysicsConstants& c = {});
PhysicsLossValue pikan_physics_loss(std::span<const BridgeParameters> batch,
                                    std::span<const double> predicted, const PhysicsConstants& c = {});

// Residual breakdown serializers for the contribution report.
std::string residuals_to_json(const PhysicsResiduals& r);
std::string residuals_to_csv(const PhysicsResiduals& r);

}  // namespace pinnbridge::physics
