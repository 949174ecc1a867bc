//! Fixed-format CSV output. Identical rows always render to identical bytes.

use crate::Row;

pub const HEADER: &str =
    "axis,value,engine,robustness,std_error,ci_lo,ci_hi,pre_success,post_success,pct_fail_nodes,pct_fail_chs,seed,alpha,mode";

const SIGNIFICANT: i32 = 9;

/// Nine significant digits. Plain decimal for exponents in `-5..9`,
/// scientific otherwise; trailing zeros are dropped.
pub fn format_float(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.*e}", (SIGNIFICANT - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("exponent is an integer");
    if (-5..SIGNIFICANT).contains(&exp) {
        let decimals = (SIGNIFICANT - 1 - exp).max(0) as usize;
        trim_zeros(format!("{:.*}", decimals, x))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn cell(x: Option<f64>) -> String {
    x.map(format_float).unwrap_or_default()
}

pub fn render(rows: &[Row]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(HEADER);
    out.push('\n');
    for r in rows {
        let fields = [
            r.axis.name().to_string(),
            format_float(r.value),
            r.engine.tag().to_string(),
            cell(r.robustness),
            cell(r.std_error),
            cell(r.ci.map(|c| c.0)),
            cell(r.ci.map(|c| c.1)),
            cell(r.pre_success),
            cell(r.post_success),
            cell(r.pct_fail_nodes),
            cell(r.pct_fail_chs),
            r.seed.to_string(),
            format_float(r.alpha),
            r.mode.clone(),
        ];
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}
