//! Time-stamped voltage samples and their CSV form (`t,v1,v2[,w1,w2,s1,s2]`).

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::MLParams;

/// Gating and synaptic channels recorded alongside the voltages.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GateChannels {
    pub w1: Vec<f64>,
    pub w2: Vec<f64>,
    pub s1: Vec<f64>,
    pub s2: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub params: MLParams,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VoltageTrace {
    pub times: Vec<f64>,
    pub v1: Vec<f64>,
    pub v2: Vec<f64>,
    pub gates: Option<GateChannels>,
    pub meta: Option<TraceMeta>,
}

impl VoltageTrace {
    pub fn new(times: Vec<f64>, v1: Vec<f64>, v2: Vec<f64>) -> Result<Self> {
        let t = Self {
            times,
            v1,
            v2,
            gates: None,
            meta: None,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Voltage channel by neuron index (0 or 1).
    pub fn voltage(&self, k: usize) -> &[f64] {
        match k {
            0 => &self.v1,
            1 => &self.v2,
            _ => panic!("neuron index {k} out of range"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.times.len();
        if self.v1.len() != n || self.v2.len() != n {
            return Err(Error::LengthMismatch(format!(
                "times {n}, v1 {}, v2 {}",
                self.v1.len(),
                self.v2.len()
            )));
        }
        if let Some(g) = &self.gates {
            if [g.w1.len(), g.w2.len(), g.s1.len(), g.s2.len()]
                .iter()
                .any(|&l| l != n)
            {
                return Err(Error::LengthMismatch("gate channels".into()));
            }
        }
        if let Some(i) = self.times.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::Malformed(format!(
                "times not strictly increasing at row {}",
                i + 1
            )));
        }
        Ok(())
    }

    /// Samples with `t >= t_start`.
    pub fn window_from(&self, t_start: f64) -> VoltageTrace {
        let i0 = self.times.partition_point(|&t| t < t_start);
        VoltageTrace {
            times: self.times[i0..].to_vec(),
            v1: self.v1[i0..].to_vec(),
            v2: self.v2[i0..].to_vec(),
            gates: self.gates.as_ref().map(|g| GateChannels {
                w1: g.w1[i0..].to_vec(),
                w2: g.w2[i0..].to_vec(),
                s1: g.s1[i0..].to_vec(),
                s2: g.s2[i0..].to_vec(),
            }),
            meta: self.meta,
        }
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        match &self.gates {
            Some(g) => {
                wr.write_record(["t", "v1", "v2", "w1", "w2", "s1", "s2"])?;
                for i in 0..self.len() {
                    wr.write_record(
                        [
                            self.times[i],
                            self.v1[i],
                            self.v2[i],
                            g.w1[i],
                            g.w2[i],
                            g.s1[i],
                            g.s2[i],
                        ]
                        .map(|x| x.to_string()),
                    )?;
                }
            }
            None => {
                wr.write_record(["t", "v1", "v2"])?;
                for i in 0..self.len() {
                    wr.write_record([self.times[i], self.v1[i], self.v2[i]].map(|x| x.to_string()))?;
                }
            }
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let header: Vec<String> = rd.headers()?.iter().map(|h| h.trim().to_string()).collect();
        let with_gates = match header.iter().map(String::as_str).collect::<Vec<_>>()[..] {
            ["t", "v1", "v2"] => false,
            ["t", "v1", "v2", "w1", "w2", "s1", "s2"] => true,
            _ => {
                return Err(Error::Malformed(format!(
                    "unexpected trace header {header:?}"
                )))
            }
        };
        let mut cols: Vec<Vec<f64>> = vec![Vec::new(); header.len()];
        for (row, rec) in rd.records().enumerate() {
            let rec = rec?;
            if rec.len() != header.len() {
                return Err(Error::Malformed(format!("row {} has {} fields", row + 1, rec.len())));
            }
            for (c, field) in rec.iter().enumerate() {
                let x: f64 = field.trim().parse().map_err(|e| {
                    Error::Malformed(format!("row {} column {}: {field:?}: {e}", row + 1, header[c]))
                })?;
                cols[c].push(x);
            }
        }
        let mut it = cols.into_iter();
        let mut next = || it.next().unwrap();
        let (times, v1, v2) = (next(), next(), next());
        let gates = with_gates.then(|| GateChannels {
            w1: next(),
            w2: next(),
            s1: next(),
            s2: next(),
        });
        let t = VoltageTrace {
            times,
            v1,
            v2,
            gates,
            meta: None,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn write_csv_file(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(path)?))
    }

    pub fn read_csv_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_increasing_times() {
        assert!(VoltageTrace::new(vec![0.0, 1.0, 1.0], vec![0.0; 3], vec![0.0; 3]).is_err());
        assert!(VoltageTrace::new(vec![0.0, 1.0], vec![0.0; 3], vec![0.0; 2]).is_err());
    }

    #[test]
    fn csv_rejects_bad_header_and_fields() {
        assert!(VoltageTrace::read_csv("t,a,b\n0,1,2\n".as_bytes()).is_err());
        assert!(VoltageTrace::read_csv("t,v1,v2\n0,1,x\n".as_bytes()).is_err());
        let ok = VoltageTrace::read_csv("t,v1,v2\n0,1,2\n0.5,-1.5,3e-2\n".as_bytes()).unwrap();
        assert_eq!(ok.v2, vec![2.0, 0.03]);
    }

    #[test]
    fn window_from_drops_prefix() {
        let t = VoltageTrace::new(vec![0.0, 1.0, 2.0, 3.0], vec![1.0; 4], vec![2.0; 4]).unwrap();
        let w = t.window_from(1.5);
        assert_eq!(w.times, vec![2.0, 3.0]);
    }
}
