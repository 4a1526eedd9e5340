mod common;

use common::*;

#[test]
fn equilibrium_residual_on_random_designs() {
    residuals_are_small(1000).unwrap();
}

#[test]
fn beam_deflection_matches_theory() {
    simply_supported_beam_deflection().unwrap();
}

#[test]
fn symmetric_designs_have_equal_abutment_reactions() {
    reactions_are_symmetric(100).unwrap();
}

#[test]
fn deck_area_lowers_stress_and_raises_cost() {
    deck_area_monotonicity(100).unwrap();
}

#[test]
fn stiffer_deck_does_not_deflect_more() {
    deck_stiffness_deflection(100).unwrap();
}

#[test]
fn vertical_link_stiffness_does_not_worsen_comfort() {
    comfort_vertical_stiffness(100).unwrap();
}

#[test]
fn cable_cost_doubles_with_area() {
    cable_cost_is_linear_in_area().unwrap();
}

#[test]
fn cost_is_invariant_to_cable_order() {
    cost_ignores_cable_order().unwrap();
}

#[test]
fn interleaved_evaluations_match_isolated_ones() {
    evaluation_is_pure().unwrap();
}

#[test]
fn uplift_gives_plain_beam() {
    uplift_releases_every_cable().unwrap();
}

#[test]
fn midpoint_cost_is_frozen() {
    midpoint_cost_regression().unwrap();
}

#[test]
fn same_design_same_bits() {
    evaluation_is_deterministic().unwrap();
}
