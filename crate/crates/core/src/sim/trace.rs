use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::phasor::SequenceSet;

/// Network state at one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub index: usize,
    pub t: f64,
    pub u_pcc: SequenceSet,
    /// Terminal voltages, machine order.
    pub terminal: Vec<SequenceSet>,
    /// Injected currents, system base.
    pub currents: Vec<SequenceSet>,
}

/// Uniformly sampled simulation output. Powers are on the system base.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    pub t: Vec<f64>,
    /// Active power including the double-frequency ripple.
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    /// One-period sliding mean of `p`.
    pub p_dc: Vec<f64>,
    pub u_pos: Vec<f64>,
    pub u_neg: Vec<f64>,
    pub machine_ids: Vec<String>,
    /// Positive-sequence d current per machine, own base.
    pub i_d: Vec<Vec<f64>>,
    /// Last sample before fault clearance.
    pub pre_clear: Option<Snapshot>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    P,
    Q,
    PDc,
    UPos,
    UNeg,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn field(&self, f: Field) -> &[f64] {
        match f {
            Field::P => &self.p,
            Field::Q => &self.q,
            Field::PDc => &self.p_dc,
            Field::UPos => &self.u_pos,
            Field::UNeg => &self.u_neg,
        }
    }

    pub fn step(&self) -> f64 {
        if self.t.len() < 2 {
            0.0
        } else {
            self.t[1] - self.t[0]
        }
    }

    pub fn header(&self) -> Vec<String> {
        let mut h: Vec<String> = ["t", "p", "q", "p_dc", "u_pos", "u_neg"].iter().map(|s| s.to_string()).collect();
        h.extend(self.machine_ids.iter().map(|id| format!("id_{id}")));
        h
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.header())?;
        let mut row = Vec::with_capacity(6 + self.i_d.len());
        for k in 0..self.len() {
            row.clear();
            for v in [self.t[k], self.p[k], self.q[k], self.p_dc[k], self.u_pos[k], self.u_neg[k]] {
                row.push(v.to_string());
            }
            for m in &self.i_d {
                row.push(m[k].to_string());
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Trace> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers()?.clone();
        let fixed = ["t", "p", "q", "p_dc", "u_pos", "u_neg"];
        if header.len() < fixed.len() || header.iter().zip(fixed).any(|(a, b)| a != b) {
            return Err(Error::Parse {
                location: "trace header".into(),
                message: format!("expected columns {fixed:?} first"),
            });
        }
        let mut trace = Trace::default();
        for h in header.iter().skip(fixed.len()) {
            let id = h.strip_prefix("id_").ok_or_else(|| Error::Parse {
                location: "trace header".into(),
                message: format!("unexpected column `{h}`"),
            })?;
            trace.machine_ids.push(id.to_string());
            trace.i_d.push(Vec::new());
        }
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            let mut vals = Vec::with_capacity(rec.len());
            for (col, s) in rec.iter().enumerate() {
                vals.push(s.parse::<f64>().map_err(|e| Error::Parse {
                    location: format!("row {}, column {}", line + 2, col + 1),
                    message: e.to_string(),
                })?);
            }
            trace.t.push(vals[0]);
            trace.p.push(vals[1]);
            trace.q.push(vals[2]);
            trace.p_dc.push(vals[3]);
            trace.u_pos.push(vals[4]);
            trace.u_neg.push(vals[5]);
            for (m, v) in trace.i_d.iter_mut().zip(&vals[6..]) {
                m.push(*v);
            }
        }
        Ok(trace)
    }

    /// First sample index with `t >= time`.
    pub fn index_at(&self, time: f64) -> usize {
        self.t.partition_point(|&t| t < time - 1e-9)
    }
}

/// Centered sliding mean over `window` samples; windows are truncated at
/// the ends of the series.
pub fn dc_component(p: &[f64], window: usize) -> Vec<f64> {
    let n = p.len();
    let w = window.max(1);
    let back = w / 2;
    (0..n)
        .map(|k| {
            let lo = k.saturating_sub(back);
            let hi = (k + w - back).min(n);
            p[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// `sqrt(mean((test - reference)^2)) / base * 100` over `[t_a, t_b]`.
pub fn rmse_percent_series(t: &[f64], test: &[f64], reference: &[f64], window: (f64, f64), base: f64) -> Result<f64> {
    if test.len() != reference.len() || t.len() != test.len() {
        return Err(Error::MisalignedTraces);
    }
    let mut acc = 0.0;
    let mut count = 0usize;
    for k in 0..t.len() {
        if t[k] >= window.0 - 1e-9 && t[k] <= window.1 + 1e-9 {
            let d = test[k] - reference[k];
            acc += d * d;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::validation("rmse-window", "window contains no samples"));
    }
    Ok((acc / count as f64).sqrt() / base * 100.0)
}

pub fn rmse_percent(test: &Trace, reference: &Trace, field: Field, window: (f64, f64), base: f64) -> Result<f64> {
    if test.len() != reference.len() || test.t.iter().zip(&reference.t).any(|(a, b)| (a - b).abs() > 1e-9) {
        return Err(Error::MisalignedTraces);
    }
    rmse_percent_series(&test.t, test.field(field), reference.field(field), window, base)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn trace(p: Vec<f64>) -> Trace {
        let n = p.len();
        Trace {
            t: (0..n).map(|k| k as f64 * 1e-3).collect(),
            p_dc: dc_component(&p, 20),
            q: vec![0.0; n],
            u_pos: vec![1.0; n],
            u_neg: vec![0.0; n],
            machine_ids: vec!["a".into()],
            i_d: vec![p.clone()],
            p,
            pre_clear: None,
        }
    }

    #[test]
    fn dc_examples() {
        let c = vec![0.7; 100];
        assert!(dc_component(&c, 20).iter().all(|v| (v - 0.7).abs() < 1e-15));

        let s: Vec<f64> = (0..400).map(|k| (2.0 * PI * 100.0 * k as f64 * 1e-3 + 0.3).sin()).collect();
        let f = dc_component(&s, 20);
        let interior = f[20..380].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(interior < 1e-2, "attenuation: {interior}");

        let r: Vec<f64> = s.iter().map(|v| 0.6 + 0.2 * v).collect();
        let f = dc_component(&r, 20);
        assert!(f[20..380].iter().all(|v| (v - 0.6).abs() < 0.006));
    }

    #[test]
    fn rmse_examples() {
        let a = trace(vec![0.5; 50]);
        assert_eq!(rmse_percent(&a, &a, Field::P, (0.0, 1.0), 1.0).unwrap(), 0.0);
        let b = trace(vec![0.51; 50]);
        assert!((rmse_percent(&b, &a, Field::P, (0.0, 1.0), 1.0).unwrap() - 1.0).abs() < 1e-9);
        let short = trace(vec![0.5; 40]);
        assert!(matches!(rmse_percent(&short, &a, Field::P, (0.0, 1.0), 1.0), Err(Error::MisalignedTraces)));
    }

    #[test]
    fn csv_round_trip() {
        let tr = trace((0..30).map(|k| (k as f64 * 0.37).sin() / 3.0).collect());
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,p,q,p_dc,u_pos,u_neg,id_a\n"));
        let back = Trace::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, tr);
    }
}
