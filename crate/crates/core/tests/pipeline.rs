use dualbeam_core::coupling::{coupled_power, Alignment};
use dualbeam_core::design::{evaluate, max_pathway, PathwaySolution, Requirement, Scenario};
use dualbeam_core::stack::{build_unit_stack, trace_stack, LaserDiodeSpec};
use dualbeam_core::stats::{poisson_tag, synth_unit, SpikeTrain, TagClass};
use dualbeam_core::stim::{square_train, PulseTrain};

#[test]
fn manual_chain_matches_evaluate() {
    let sc = Scenario::default();
    for ld in [LaserDiodeSpec::blue_pl450b(), LaserDiodeSpec::red_hl63603tg()] {
        let pathway = 2.0 * ld.min_pathway;
        let beam = ld
            .source_beam(
                ld.theta_fwhm_1.nominal,
                ld.theta_fwhm_2.nominal,
                sc.wavelength_convention,
            )
            .unwrap();
        let stack = build_unit_stack(&ld, pathway, &sc.stack).unwrap();
        let face = trace_stack(&beam, &stack).unwrap();
        let align = Alignment { dx: 3e-6, dy: -2e-6 };
        let manual = coupled_power(&face, ld.power_at_drive, &sc.fiber, align, sc.rel_tol).unwrap();
        let direct = evaluate(
            &ld,
            pathway,
            ld.theta_fwhm_1.nominal,
            ld.theta_fwhm_2.nominal,
            align,
            &sc,
        )
        .unwrap();
        assert_eq!(manual, direct);
    }
}

#[test]
fn solved_pathway_sits_on_the_requirement() {
    let sc = Scenario::default();
    let ld = LaserDiodeSpec::red_hl63603tg();
    let req = Requirement::red();
    let PathwaySolution::Found { pathway, coupled_power } = max_pathway(&ld, &sc, &req).unwrap() else {
        panic!("expected a finite pathway");
    };
    assert!(coupled_power >= req.min_power);
    let beyond = evaluate(
        &ld,
        pathway + 2e-6,
        ld.theta_fwhm_1.nominal,
        ld.theta_fwhm_2.nominal,
        Alignment::default(),
        &sc,
    )
    .unwrap();
    assert!(beyond.coupled_power < req.min_power);
}

#[test]
fn files_round_trip_into_a_tagging_decision() {
    let pulses = square_train(2.0, 0.1, 20.0, 300).unwrap();
    let mut csv = Vec::new();
    pulses.write_csv(&mut csv).unwrap();
    let reread = PulseTrain::read_csv(&csv[..]).unwrap();
    assert_eq!(reread.pulses(), pulses.pulses());

    let epoch = (0.0, pulses.total_span());
    let unit = synth_unit(8, 3.0, &pulses, 5.0, epoch).unwrap();
    let mut text = Vec::new();
    unit.write_text(&mut text).unwrap();
    let back = SpikeTrain::read_text(&text[..], Some(epoch)).unwrap();
    assert_eq!(back, unit);

    let tag = poisson_tag(&back, &pulses, epoch, 0.01).unwrap();
    assert_eq!(tag.klass, TagClass::Activated);
}
