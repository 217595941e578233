//! Acceptance suite: one test per criterion, printing a pass/fail line each.

use qtimes::acceptance;

fn run(report: acceptance::CriterionReport) {
    println!("{}", report.summary_line());
    for line in report.detail_lines() {
        println!("{line}");
    }
    assert!(report.passed, "{} failed", report.name);
}

#[test]
fn criterion_01_sawtooth() {
    run(acceptance::criterion_1_sawtooth());
}

#[test]
fn criterion_02_exact_small_n() {
    run(acceptance::criterion_2_exact_small_n());
}

#[test]
fn criterion_03_s_envelope() {
    run(acceptance::criterion_3_s_envelope());
}

#[test]
fn criterion_04_equivalence() {
    run(acceptance::criterion_4_equivalence());
}

#[test]
fn criterion_05_arrival() {
    run(acceptance::criterion_5_arrival());
}

#[test]
fn criterion_06_backflow() {
    run(acceptance::criterion_6_backflow());
}

#[test]
fn criterion_07_decoherence() {
    run(acceptance::criterion_7_decoherence());
}

#[test]
fn criterion_08_twosided() {
    run(acceptance::criterion_8_twosided());
}

#[test]
fn criterion_09_qbm() {
    run(acceptance::criterion_9_qbm());
}

#[test]
fn criterion_10_clock() {
    run(acceptance::criterion_10_clock());
}

#[test]
fn criterion_11_properties() {
    run(acceptance::criterion_11_properties());
}
