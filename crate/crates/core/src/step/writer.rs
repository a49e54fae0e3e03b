use std::fmt::Write;

use super::{StepModel, StepValue};

/// Serializes a model back to clear-text STEP. Re-parsing the output yields
/// an entity table equal to `model`.
pub fn write_step(model: &StepModel) -> String {
    let mut out = String::from("ISO-10303-21;\nHEADER;\n");
    for record in &model.header {
        out.push_str(&record.name);
        write_params(&mut out, &record.params);
        out.push_str(";\n");
    }
    out.push_str("ENDSEC;\nDATA;\n");
    for entity in model.entities() {
        let _ = write!(out, "#{}={}", entity.id, entity.type_name);
        write_params(&mut out, &entity.attributes);
        out.push_str(";\n");
    }
    out.push_str("ENDSEC;\nEND-ISO-10303-21;\n");
    out
}

fn write_params(out: &mut String, values: &[StepValue]) {
    out.push('(');
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        write_value(out, v);
    }
    out.push(')');
}

fn write_value(out: &mut String, value: &StepValue) {
    match value {
        StepValue::Integer(i) => {
            let _ = write!(out, "{i}");
        }
        StepValue::Real(r) => out.push_str(&format_real(*r)),
        StepValue::String(s) => {
            out.push('\'');
            out.push_str(&s.replace('\'', "''"));
            out.push('\'');
        }
        StepValue::Enum(e) => {
            let _ = write!(out, ".{e}.");
        }
        StepValue::Ref(id) => {
            let _ = write!(out, "#{id}");
        }
        StepValue::Typed(name, inner) => {
            out.push_str(name);
            out.push('(');
            write_value(out, inner);
            out.push(')');
        }
        StepValue::List(items) => write_params(out, items),
        StepValue::Null => out.push('$'),
        StepValue::Derived => out.push('*'),
    }
}

/// Shortest round-tripping representation with the mandatory decimal point,
/// e.g. `1.5E0`, `1.E-3`.
fn format_real(r: f64) -> String {
    let s = format!("{r:E}");
    match s.find('E') {
        Some(pos) if !s[..pos].contains('.') => format!("{}.{}", &s[..pos], &s[pos..]),
        _ => s,
    }
}
