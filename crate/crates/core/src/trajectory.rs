//! Observed demonstrations and their CSV representation.
//!
//! Continuous files use the header `traj_id,t,x,y`, finite files
//! `traj_id,t,state`. Rows are sorted by `(traj_id, t)` and `t` counts from 0
//! within each trajectory. Floats are written in shortest round-trip form, so
//! a write/read cycle reproduces every value bit for bit.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::types::State;

/// One or more state sequences. Only states are observed; actions are latent.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    states: Vec<State>,
    /// Start offset of every segment, strictly increasing, first entry 0.
    starts: Vec<usize>,
}

impl Trajectory {
    /// Builds a trajectory set from individual demonstrations.
    pub fn new(segments: Vec<Vec<State>>) -> Result<Self> {
        let mut states = Vec::new();
        let mut starts = Vec::with_capacity(segments.len());
        for seg in segments {
            starts.push(states.len());
            states.extend(seg);
        }
        Self::from_parts(states, starts)
    }

    pub fn from_parts(states: Vec<State>, starts: Vec<usize>) -> Result<Self> {
        if starts.is_empty() {
            return Err(Error::Structural("trajectory set is empty".into()));
        }
        if starts[0] != 0 {
            return Err(Error::Structural("first segment must start at offset 0".into()));
        }
        let mut ends: Vec<usize> = starts[1..].to_vec();
        ends.push(states.len());
        for (s, e) in starts.iter().zip(&ends) {
            if e < s || e - s < 2 {
                return Err(Error::Structural(
                    "every trajectory needs at least two states".into(),
                ));
            }
        }
        let continuous = matches!(states[0], State::Point(_));
        if states
            .iter()
            .any(|s| matches!(s, State::Point(_)) != continuous)
        {
            return Err(Error::Structural("mixed continuous and finite states".into()));
        }
        Ok(Self { states, starts })
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn n_segments(&self) -> usize {
        self.starts.len()
    }

    pub fn is_continuous(&self) -> bool {
        matches!(self.states[0], State::Point(_))
    }

    pub fn segment_bounds(&self, k: usize) -> (usize, usize) {
        let end = self.starts.get(k + 1).copied().unwrap_or(self.states.len());
        (self.starts[k], end)
    }

    pub fn segment(&self, k: usize) -> &[State] {
        let (s, e) = self.segment_bounds(k);
        &self.states[s..e]
    }

    /// Time indices that carry an action: all but the last of each segment.
    pub fn action_indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_segments()).flat_map(move |k| {
            let (s, e) = self.segment_bounds(k);
            s..e - 1
        })
    }

    pub fn n_transitions(&self) -> usize {
        self.states.len() - self.starts.len()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        if self.is_continuous() {
            w.write_record(["traj_id", "t", "x", "y"])?;
        } else {
            w.write_record(["traj_id", "t", "state"])?;
        }
        for k in 0..self.n_segments() {
            for (t, s) in self.segment(k).iter().enumerate() {
                match *s {
                    // `{}` on f64 prints the shortest string that parses back exactly.
                    State::Point([x, y]) => w.write_record([
                        k.to_string(),
                        t.to_string(),
                        format!("{x}"),
                        format!("{y}"),
                    ])?,
                    State::Index(i) => {
                        w.write_record([k.to_string(), t.to_string(), i.to_string()])?
                    }
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(input);
        let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
        let continuous = match header.iter().map(String::as_str).collect::<Vec<_>>()[..] {
            ["traj_id", "t", "x", "y"] => true,
            ["traj_id", "t", "state"] => false,
            _ => {
                return Err(Error::Parse {
                    line: 1,
                    msg: format!("unexpected header {header:?}"),
                })
            }
        };

        let mut segments: Vec<Vec<State>> = Vec::new();
        let mut current: Option<usize> = None;
        for (n, rec) in r.records().enumerate() {
            let line = n + 2;
            let rec = rec?;
            let field = |i: usize| -> Result<&str> {
                rec.get(i).ok_or(Error::Parse {
                    line,
                    msg: format!("missing column {i}"),
                })
            };
            let parse_err = |msg: String| Error::Parse { line, msg };
            let id: usize = field(0)?
                .parse()
                .map_err(|e| parse_err(format!("traj_id: {e}")))?;
            let t: usize = field(1)?
                .parse()
                .map_err(|e| parse_err(format!("t: {e}")))?;
            let state = if continuous {
                let x: f64 = field(2)?
                    .parse()
                    .map_err(|e| parse_err(format!("x: {e}")))?;
                let y: f64 = field(3)?
                    .parse()
                    .map_err(|e| parse_err(format!("y: {e}")))?;
                if !x.is_finite() || !y.is_finite() {
                    return Err(parse_err("non-finite coordinate".into()));
                }
                State::Point([x, y])
            } else {
                State::Index(
                    field(2)?
                        .parse()
                        .map_err(|e| parse_err(format!("state: {e}")))?,
                )
            };
            if current != Some(id) {
                if current.is_some_and(|c| id < c) {
                    return Err(parse_err("rows not sorted by traj_id".into()));
                }
                current = Some(id);
                segments.push(Vec::new());
            }
            let seg = segments.last_mut().expect("segment pushed above");
            if t != seg.len() {
                return Err(parse_err(format!(
                    "expected t = {} in trajectory {id}, found {t}",
                    seg.len()
                )));
            }
            seg.push(state);
        }
        Trajectory::new(segments)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn action_index_set_skips_segment_ends() {
        let traj = Trajectory::new(vec![
            vec![State::Index(0), State::Index(0), State::Index(1)],
            vec![State::Index(2), State::Index(1)],
        ])
        .unwrap();
        assert_eq!(traj.action_indices().collect::<Vec<_>>(), vec![0, 1, 3]);
        assert_eq!(traj.n_transitions(), 3);
    }

    #[test]
    fn short_segments_are_rejected() {
        assert!(Trajectory::new(vec![vec![State::Index(0)]]).is_err());
        assert!(Trajectory::new(vec![]).is_err());
        assert!(Trajectory::new(vec![vec![State::Index(0), State::Point([0.0, 0.0])]]).is_err());
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let traj = Trajectory::new(vec![
            vec![
                State::Point([0.1, -2.0 / 3.0]),
                State::Point([1e-300, 123456.789]),
            ],
            vec![
                State::Point([std::f64::consts::PI, -0.0]),
                State::Point([5e-324, 1.0]),
                State::Point([0.30000000000000004, 2.5]),
            ],
        ])
        .unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("traj_id,t,x,y\n"));
        let back = Trajectory::read_csv(&buf[..]).unwrap();
        for (a, b) in traj.states().iter().zip(back.states()) {
            let (a, b) = (a.point().unwrap(), b.point().unwrap());
            assert_eq!(a[0].to_bits(), b[0].to_bits());
            assert_eq!(a[1].to_bits(), b[1].to_bits());
        }
        assert_eq!(back.n_segments(), 2);
    }

    #[test]
    fn csv_rejects_unsorted_rows() {
        let text = "traj_id,t,state\n0,0,1\n0,2,3\n";
        assert!(Trajectory::read_csv(text.as_bytes()).is_err());
        let text = "traj_id,t,state\n1,0,1\n1,1,2\n0,0,3\n0,1,3\n";
        assert!(Trajectory::read_csv(text.as_bytes()).is_err());
        let text = "traj_id,t,state\n0,0,1\n0,1,2\n";
        assert_eq!(Trajectory::read_csv(text.as_bytes()).unwrap().len(), 2);
    }
}
