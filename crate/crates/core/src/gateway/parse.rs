//! Lenient extraction of structured answers from judge replies.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde_json::Value;

use crate::distribution::ActionDistribution;
use crate::types::ActionKind;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("no percentage found in reply")]
    NoPercentageFound,
    #[error("malformed JSON: {0}")]
    MalformedJson(String),
    #[error("unexpected action `{0}`")]
    UnknownAction(String),
    #[error("negative or non-numeric probability for `{0}`")]
    InvalidProbability(String),
    #[error("every probability is zero")]
    AllZero,
}

/// The last number written directly before a `%`, as a fraction clamped to
/// `[0, 1]`.
pub fn parse_percentage(reply: &str) -> Result<f64, ParseError> {
    let bytes = reply.as_bytes();
    for (pct, _) in reply
        .match_indices('%')
        .collect::<Vec<_>>()
        .into_iter()
        .rev()
    {
        let mut start = pct;
        while start > 0 && (bytes[start - 1].is_ascii_digit() || bytes[start - 1] == b'.') {
            start -= 1;
        }
        let digits = reply[start..pct].trim_start_matches('.');
        if !digits.bytes().any(|b| b.is_ascii_digit()) {
            continue;
        }
        let digits = digits.trim_end_matches('.');
        if let Ok(v) = digits.parse::<f64>() {
            return Ok((v / 100.0).clamp(0.0, 1.0));
        }
    }
    Err(ParseError::NoPercentageFound)
}

/// The outermost `{...}` span of a reply (fences and prose around it are
/// ignored).
pub fn extract_json_object(reply: &str) -> Result<Value, ParseError> {
    let start = reply.find('{');
    let end = reply.rfind('}');
    match (start, end) {
        (Some(s), Some(e)) if e > s => serde_json::from_str(&reply[s..=e])
            .map_err(|err| ParseError::MalformedJson(err.to_string())),
        _ => Err(ParseError::MalformedJson("no JSON object in reply".into())),
    }
}

/// Parses an action→probability JSON object into a distribution over
/// `expected` (missing actions get zero mass). Values need not sum to 100.
pub fn parse_probability_json(
    reply: &str,
    expected: &[ActionKind],
) -> Result<ActionDistribution, ParseError> {
    let value = extract_json_object(reply)?;
    let obj = value
        .as_object()
        .ok_or_else(|| ParseError::MalformedJson("expected an object".into()))?;
    let mut weights: Vec<(ActionKind, f64)> = expected.iter().map(|a| (*a, 0.0)).collect();
    for (key, v) in obj {
        let action = key
            .parse::<ActionKind>()
            .ok()
            .filter(|a| expected.contains(a))
            .ok_or_else(|| ParseError::UnknownAction(key.clone()))?;
        let p = match v {
            Value::Number(n) => n.as_f64(),
            Value::String(s) => s.trim().trim_end_matches('%').trim().parse::<f64>().ok(),
            _ => None,
        }
        .filter(|p| p.is_finite() && *p >= 0.0)
        .ok_or_else(|| ParseError::InvalidProbability(key.clone()))?;
        if let Some(slot) = weights.iter_mut().find(|(a, _)| *a == action) {
            slot.1 += p;
        }
    }
    ActionDistribution::from_weights(weights).map_err(|_| ParseError::AllZero)
}

/// Value of the last line of the form `Label: value` (case-insensitive label,
/// markdown emphasis tolerated).
pub fn labeled_value<'a>(reply: &'a str, label: &str) -> Option<&'a str> {
    reply.lines().rev().find_map(|line| {
        let l = line.trim().trim_start_matches(['*', '-', '#', ' ']);
        let lower_ok = l.len() >= label.len() && l[..label.len()].eq_ignore_ascii_case(label);
        if !lower_ok {
            return None;
        }
        let rest = l[label.len()..].trim_start_matches('*').trim_start();
        rest.strip_prefix(':')
            .map(|v| v.trim().trim_matches('*').trim())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ActionKind::*;

    #[test]
    fn percentage_takes_last_match() {
        assert_eq!(parse_percentage("Overall this concludes with 80%"), Ok(0.8));
        assert_eq!(parse_percentage("the score should be 0%"), Ok(0.0));
        assert_eq!(parse_percentage("first 20% then finally 65.5%."), Ok(0.655));
        assert_eq!(
            parse_percentage("no numbers here"),
            Err(ParseError::NoPercentageFound)
        );
        assert_eq!(parse_percentage("100% and then % alone"), Ok(1.0));
        assert_eq!(parse_percentage("weird 250%"), Ok(1.0));
    }

    #[test]
    fn probability_json_normalizes() {
        let d = parse_probability_json(r#"{"Deny":50,"Engage":50}"#, &[Deny, Engage]).unwrap();
        assert_eq!(d.prob(Deny), 0.5);
        assert_eq!(d.prob(Engage), 0.5);
    }

    #[test]
    fn probability_json_tolerates_bad_sums() {
        // 30 / 120 and 60 / 120
        let d = parse_probability_json(
            r#"{"Deny":30,"Engage":30,"Inform":60}"#,
            &[Deny, Engage, Inform],
        )
        .unwrap();
        assert!((d.prob(Deny) - 0.25).abs() < 1e-12);
        assert!((d.prob(Engage) - 0.25).abs() < 1e-12);
        assert!((d.prob(Inform) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn probability_json_fills_missing_with_zero() {
        let d = parse_probability_json("```json\n{\"Deny\": 100}\n```", &[Deny, Engage]).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.prob(Engage), 0.0);
    }

    #[test]
    fn probability_json_errors() {
        assert!(matches!(
            parse_probability_json("not json", &[Deny]),
            Err(ParseError::MalformedJson(_))
        ));
        assert_eq!(
            parse_probability_json(r#"{"Plan": 10}"#, &[Deny]),
            Err(ParseError::UnknownAction("Plan".into()))
        );
        assert_eq!(
            parse_probability_json(r#"{"Deny": 0}"#, &[Deny]),
            Err(ParseError::AllZero)
        );
        assert_eq!(
            parse_probability_json(r#"{"Deny": -5}"#, &[Deny]),
            Err(ParseError::InvalidProbability("Deny".into()))
        );
    }

    #[test]
    fn labeled_lines() {
        let r = "Analysis of Client's Action: unsure.\nChosen Action: Hesitate";
        assert_eq!(labeled_value(r, "Chosen Action"), Some("Hesitate"));
        assert_eq!(
            labeled_value("**Chosen Action:** Engage", "Chosen Action"),
            Some("Engage")
        );
        assert_eq!(labeled_value("nothing", "Chosen Action"), None);
    }
}
