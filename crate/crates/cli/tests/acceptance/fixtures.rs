use std::collections::BTreeMap;
use std::time::Instant;

use esdtrace_core::diffstats::{compare_distributions, Partition};
use esdtrace_core::logmodel::{parse_log, Condition, ParseMode, RegisterSchema, RunMetadata};
use esdtrace_core::stategraph::{AbstractionConfig, ExecutionTrace, KeyEntry, StateKey};
use esdtrace_core::weights::{build_counts, build_weights, classify, Label, Variant};

use crate::{ensure, Outcome};

/// A sample register block as printed by the instrumented driver, with
/// its original tab indentation.
pub const SAMPLE_BLOCK: &str = "\tfunction: ohci_irq
\tHcControl: 0x83
\tHcCommandStatus: 0x4
\tHcInterruptStatus: 0x24
\tHcInterruptEnable: 0x8000005e
\tHcInterruptDisable: 0x8000005e
\tHcHCCA: 0x338b1000
\tHcPeriodCurrentED: 0x0
\tHcControlHeadED: 0x339b2000
\tHcControlCurrentED: 0x0
\tHcBulkHeadED: 0x339b2080
\tHcBulkCurrentED: 0x0
\tHcDoneHead: 0x0
\tHcFmInterval: 0xa7782edf
\tHcFmRemaining: 0x80002760
\tHcFmNumber: 0x921d
\tHcPeriodicStart: 0x2a2f
\tHcLSThreshold: 0x628
\tHcRhDescriptorA: 0x2001202
\tHcRhDescriptorB: 0x0
\tHcRhStatus: 0x8000
\tHcRhDescriptorA: 0x2001202
\tHcRhPortStatus[0]: 0x103
\tHcRhPortStatus[1]: 0x100
\tDone.
";

/// A single-register state keyed by `symbol`.
pub fn sym(symbol: u32) -> StateKey {
    StateKey::new(vec![KeyEntry::Value(symbol)])
}

pub fn sym_trace(run_id: &str, condition: Condition, symbols: &[u32]) -> ExecutionTrace {
    let keys: Vec<StateKey> = symbols.iter().map(|&s| sym(s)).collect();
    let functions = vec!["f".to_string(); keys.len()];
    ExecutionTrace::from_keys(
        RunMetadata::new(run_id, condition),
        AbstractionConfig::default(),
        keys,
        functions,
    )
    .expect("symbol keys intern")
}

pub fn parser_fixture() -> Outcome {
    let start = Instant::now();
    let schema = RegisterSchema::ohci();
    let log = parse_log(SAMPLE_BLOCK, &schema, ParseMode::Strict).map_err(|e| e.to_string())?;
    ensure(log.snapshots.len() == 1, || format!("{} snapshots", log.snapshots.len()))?;
    let snap = &log.snapshots[0];
    ensure(snap.function_name == "ohci_irq", || format!("function {}", snap.function_name))?;
    for (register, want) in [
        ("HcControl", 0x83),
        ("HcHCCA", 0x338b_1000),
        ("HcRhPortStatus[0]", 0x103),
        ("HcRhDescriptorA", 0x0200_1202),
    ] {
        let got = snap.value(&schema, register);
        ensure(got == Some(want), || format!("{register} = {got:?}, want {want:#x}"))?;
    }
    ensure(snap.values.len() == 22, || format!("{} registers", snap.values.len()))?;

    // Serialization writes the block without indentation and with the
    // repeated register once, so the expected text is the sample with
    // exactly those two differences.
    let mut expected = String::new();
    let mut seen_descriptor_a = false;
    for line in SAMPLE_BLOCK.lines() {
        let line = line.trim_start_matches('\t');
        if line.starts_with("HcRhDescriptorA:") {
            if seen_descriptor_a {
                continue;
            }
            seen_descriptor_a = true;
        }
        expected.push_str(line);
        expected.push('\n');
    }
    let text = log.to_log_text();
    ensure(text == expected, || format!("serialized text differs:\n{text}"))?;
    let again = parse_log(&text, &schema, ParseMode::Strict).map_err(|e| e.to_string())?;
    ensure(again.snapshots == log.snapshots, || "re-parsed snapshots differ".into())?;
    ensure(again.warnings.is_empty(), || format!("re-parse warned: {:?}", again.warnings))?;
    ensure(again.to_log_text() == text, || "second serialization differs".into())?;

    let elapsed = start.elapsed().as_secs_f64();
    ensure(elapsed < 1.0, || format!("took {elapsed:.3}s"))?;
    Ok("1 snapshot, 22 registers, byte-identical round trip".into())
}

pub fn table_arithmetic() -> Outcome {
    let values = [0x8000_005e_u32, 0x8000_001a, 0x8000_005a, 0x8000_001e];
    let enable: BTreeMap<u32, f64> = values.into_iter().zip([0.20041, 0.09677, 0.65932, 0.04359]).collect();
    let disable: BTreeMap<u32, f64> = values.into_iter().zip([0.20041, 0.09666, 0.65943, 0.04359]).collect();
    let expected: BTreeMap<u32, f64> = values.into_iter().zip([0.0, 0.00011, -0.00011, 0.0]).collect();

    let rows = compare_distributions(&enable, &disable);
    ensure(rows.len() == 4, || format!("{} rows", rows.len()))?;
    let mut worst = 0.0f64;
    for row in &rows {
        let want = expected[&row.value];
        let err = (row.difference - want).abs();
        worst = worst.max(err);
        ensure(err <= 1e-12, || {
            format!("{:#x}: difference {} want {want}", row.value, row.difference)
        })?;
    }
    Ok(format!("4 differences, max error {worst:.1e}"))
}

pub fn two_log_values() -> Outcome {
    const X: u32 = 1;
    const Y: u32 = 2;
    const Z: u32 = 3;
    let part = Partition::split([
        sym_trace("b", Condition::Baseline, &[X, X, Y]),
        sym_trace("e", Condition::Esd, &[Y, Z, Z, Z]),
    ])
    .map_err(|e| e.to_string())?;
    let counts = build_counts(&part).map_err(|e| e.to_string())?;
    let y = sym(Y).id();
    let probe = sym_trace("probe", Condition::Esd, &[Y, Z]);

    let close = |got: f64, want: f64, what: &str| {
        ensure((got - want).abs() <= 1e-12, || format!("{what} = {got}, want {want}"))
    };
    let table = |variant, delta| build_weights(&counts, variant, delta).map_err(|e| e.to_string());

    let plain = table(Variant::Plain, 0.0)?;
    close(plain.weight(y).unwrap_or(f64::NAN), -1.0 / 7.0, "plain w_Y")?;
    let add = table(Variant::AddDelta, 2.0)?;
    close(add.weight(y).unwrap_or(f64::NAN), -1.0 / 11.0, "add-delta(2) w_Y")?;
    let after = table(Variant::ScaleAfter, 0.5)?;
    close(after.weight(y).unwrap_or(f64::NAN), -1.0 / 14.0, "scale-after(0.5) w_Y")?;

    let c_plain = classify(&plain, &probe).map_err(|e| e.to_string())?;
    close(c_plain.score, 3.0 / 7.0, "plain C_[Y,Z]")?;
    ensure(c_plain.label == Label::Esd, || format!("plain label {}", c_plain.label))?;
    let c_after = classify(&after, &probe).map_err(|e| e.to_string())?;
    close(c_after.score, 3.0 / 14.0, "scale-after C_[Y,Z]")?;
    ensure(c_after.label == Label::Esd, || format!("scale-after label {}", c_after.label))?;
    Ok("w_Y = -1/7, -1/11, -1/14; C = 3/7, 3/14, both esd".into())
}
