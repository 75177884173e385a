//! Deterministic synthetic inputs shared by the pipeline benches.

use vlmbench::Answer;

/// A step-by-step trace of roughly `steps` lines ending in an answer line.
pub fn reasoning_trace(steps: usize, answer: &str) -> String {
    let mut out = String::new();
    for i in 1..=steps {
        out.push_str(&format!("Step {i}: looking at region {i}, I count {} objects.\n", i % 4));
    }
    out.push_str(&format!("ANSWER: {answer}\n"));
    out
}

/// Run answers cycling through a small pool with an occasional NA.
pub fn run_answers(n: usize, seed: usize) -> Vec<Answer> {
    (0..n)
        .map(|i| match (i + seed) % 7 {
            6 => Answer::Na,
            k => Answer::Number((k % 3) as f64),
        })
        .collect()
}

/// Paired truth and prediction series with a small, deterministic error.
pub fn paired_series(n: usize) -> (Vec<f64>, Vec<f64>) {
    let truth: Vec<f64> = (0..n).map(|i| (i * 37 % 23) as f64).collect();
    let pred = truth
        .iter()
        .enumerate()
        .map(|(i, t)| t + ((i % 5) as f64 - 2.0))
        .collect();
    (truth, pred)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_ends_with_answer() {
        assert!(reasoning_trace(3, "7").trim_end().ends_with("ANSWER: 7"));
        assert_eq!(run_answers(5, 0).len(), 5);
        let (t, p) = paired_series(10);
        assert_eq!(t.len(), p.len());
    }
}
