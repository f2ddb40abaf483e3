use std::sync::OnceLock;

use regex::Regex;

use super::JudgeSelection;

fn label_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"Document\s*(\d+)").expect("static regex"))
}

/// Recovers `m` distinct labels in `1..=n` from arbitrary model output.
///
/// Scans for `Document <k>` left to right, keeping the first occurrence of
/// each in-range label and stopping at `m`. Missing slots are filled with
/// the lowest unchosen labels, which is presentation order. Any dropped
/// token or filled slot sets `repair_applied`.
///
/// Total: never fails. When `m > n` the result is clamped to `n` labels.
pub fn parse_selection(raw: &str, n: usize, m: usize) -> JudgeSelection {
    let m = m.min(n);
    let mut chosen = Vec::with_capacity(m);
    let mut taken = vec![false; n + 1];
    let mut repaired = false;

    for cap in label_pattern().captures_iter(raw) {
        let label = cap[1].parse::<usize>().ok().filter(|l| (1..=n).contains(l));
        match label {
            Some(l) if !taken[l] && chosen.len() < m => {
                taken[l] = true;
                chosen.push(l);
            }
            _ => repaired = true,
        }
    }
    if chosen.len() < m {
        repaired = true;
        let free = (1..=n).filter(|&l| !taken[l]);
        chosen.extend(free.take(m - chosen.len()));
    }
    JudgeSelection {
        chosen_labels: chosen,
        repair_applied: repaired,
        raw_response: Some(raw.to_string()),
        retries: 0,
    }
}
