//! Binary trajectory checkpoints.
//!
//! Little-endian layout:
//!
//! ```text
//! magic "MONOCKPT", version u32
//! base_n u64, depth u64, steps u64, vertices u64
//! tau f64, t_end f64, A f64, a f64, eps f64, M f64
//! initial terms f64 x2
//! initial state: t f64, u f64 x vertices, w f64 x vertices
//! per step: t f64, K_n u64, stalled u8, increments f64 x K_n, u, w
//! ```
//!
//! The mesh is rebuilt as level `depth` of the structured `base_n` chain.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::ionic::AlievPanfilovParams;
use crate::mesh::MeshHierarchy;
use crate::solver::{StateField, StepRecord, TrajectorySolution};

const MAGIC: &[u8; 8] = b"MONOCKPT";
const VERSION: u32 = 1;

/// A trajectory together with the run settings that produced it.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub base_n: usize,
    pub depth: usize,
    pub tau: f64,
    pub t_end: f64,
    pub params: AlievPanfilovParams,
    pub trajectory: TrajectorySolution,
}

impl Checkpoint {
    /// Derive the mesh chain coordinates from the trajectory's mesh.
    pub fn new(
        trajectory: TrajectorySolution,
        tau: f64,
        params: AlievPanfilovParams,
    ) -> Result<Self> {
        let depth = trajectory.mesh.depth();
        let cells = trajectory
            .mesh
            .cells_per_side()
            .ok_or_else(|| Error::Format {
                what: "checkpoint",
                reason: "only structured unit-square meshes can be checkpointed".into(),
            })?;
        Ok(Checkpoint {
            base_n: cells >> depth,
            depth,
            tau,
            t_end: trajectory.final_time(),
            params,
            trajectory,
        })
    }

    pub fn to_writer<W: Write>(&self, mut out: W) -> Result<()> {
        let traj = &self.trajectory;
        let nv = traj.mesh.num_vertices();
        let mut buf = Vec::with_capacity(64 + traj.states.len() * (16 * nv + 64));
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&VERSION.to_le_bytes());
        for v in [self.base_n, self.depth, traj.num_steps(), nv] {
            buf.extend_from_slice(&(v as u64).to_le_bytes());
        }
        let p = &self.params;
        let (i0, i1) = traj.initial_terms;
        for v in [
            self.tau,
            self.t_end,
            p.a_strength,
            p.threshold,
            p.eps,
            p.conductivity,
            i0,
            i1,
        ] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        let put_state = |buf: &mut Vec<u8>, s: &StateField| {
            buf.extend_from_slice(&s.time.to_le_bytes());
            for v in s.u.iter().chain(&s.w) {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        };
        put_state(&mut buf, &traj.states[0]);
        for (step, state) in traj.steps.iter().zip(&traj.states[1..]) {
            buf.extend_from_slice(&state.time.to_le_bytes());
            buf.extend_from_slice(&(step.iterations as u64).to_le_bytes());
            buf.push(step.stalled as u8);
            for v in &step.increments {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            for v in state.u.iter().chain(&state.w) {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        out.write_all(&buf)
            .map_err(|e| Error::io("<checkpoint stream>", e))
    }

    pub fn from_reader<R: Read>(mut input: R) -> Result<Self> {
        let mut bytes = Vec::new();
        input
            .read_to_end(&mut bytes)
            .map_err(|e| Error::io("<checkpoint stream>", e))?;
        let mut r = Cursor {
            bytes: &bytes,
            at: 0,
        };
        if r.take(8)? != MAGIC {
            return Err(bad("not a checkpoint (bad magic)"));
        }
        let version = u32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes"));
        if version != VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let base_n = r.usize()?;
        let depth = r.usize()?;
        let steps = r.usize()?;
        let nv = r.usize()?;
        let tau = r.f64()?;
        let t_end = r.f64()?;
        let params = AlievPanfilovParams {
            a_strength: r.f64()?,
            threshold: r.f64()?,
            eps: r.f64()?,
            conductivity: r.f64()?,
        };
        let initial_terms = (r.f64()?, r.f64()?);
        if base_n == 0 || depth > 16 {
            return Err(bad("implausible mesh header"));
        }
        let mesh = Arc::clone(MeshHierarchy::unit_square(base_n, depth)?.finest());
        if mesh.num_vertices() != nv {
            return Err(bad(format!(
                "header says {nv} vertices, mesh has {}",
                mesh.num_vertices()
            )));
        }

        let mut times = Vec::with_capacity(steps + 1);
        let mut states = Vec::with_capacity(steps + 1);
        let mut records = Vec::with_capacity(steps);
        let time = r.f64()?;
        times.push(time);
        states.push(StateField {
            u: r.vec(nv)?,
            w: r.vec(nv)?,
            time,
        });
        for _ in 0..steps {
            let time = r.f64()?;
            let iterations = r.usize()?;
            let stalled = r.take(1)?[0] != 0;
            if iterations > r.remaining() / 8 {
                return Err(bad("truncated step record"));
            }
            let increments = r.vec(iterations)?;
            times.push(time);
            states.push(StateField {
                u: r.vec(nv)?,
                w: r.vec(nv)?,
                time,
            });
            records.push(StepRecord {
                iterations,
                increments,
                indicators: Vec::new(),
                stalled,
                penultimate: None,
            });
        }
        if r.remaining() != 0 {
            return Err(bad(format!("{} trailing bytes", r.remaining())));
        }
        let trajectory = TrajectorySolution {
            mesh,
            times,
            states,
            steps: records,
            initial_terms,
        };
        Ok(Checkpoint {
            base_n,
            depth,
            tau,
            t_end,
            params,
            trajectory,
        })
    }
}

fn bad(reason: impl Into<String>) -> Error {
    Error::Format {
        what: "checkpoint",
        reason: reason.into(),
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn remaining(&self) -> usize {
        self.bytes.len() - self.at
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if n > self.remaining() {
            return Err(bad("unexpected end of file"));
        }
        let s = &self.bytes[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn usize(&mut self) -> Result<usize> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes"));
        usize::try_from(v).map_err(|_| bad("count overflows usize"))
    }

    fn vec(&mut self, n: usize) -> Result<Vec<f64>> {
        if n > self.remaining() / 8 {
            return Err(bad("unexpected end of file"));
        }
        (0..n).map(|_| self.f64()).collect()
    }
}

pub fn write_checkpoint(checkpoint: &Checkpoint, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    checkpoint.to_writer(&mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_reader(std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{time_march, Discretization, MarchOptions, NewtonConfig};

    fn sample() -> Checkpoint {
        let h = MeshHierarchy::unit_square(2, 1).unwrap();
        let p = AlievPanfilovParams::default();
        let d = Discretization::aliev_panfilov(Arc::clone(h.finest()), p).unwrap();
        let traj = time_march(
            &d,
            0.25,
            0.5,
            &NewtonConfig::default(),
            &MarchOptions::default(),
        )
        .unwrap();
        Checkpoint::new(traj, 0.25, p).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let c = sample();
        assert_eq!((c.base_n, c.depth), (2, 1));
        let mut buf = Vec::new();
        c.to_writer(&mut buf).unwrap();
        let back = Checkpoint::from_reader(buf.as_slice()).unwrap();
        assert_eq!(*back.trajectory.mesh, *c.trajectory.mesh);
        assert_eq!(back.trajectory.states, c.trajectory.states);
        assert_eq!(back.trajectory.times, c.trajectory.times);
        assert_eq!(
            back.trajectory.iteration_counts(),
            c.trajectory.iteration_counts()
        );
        assert_eq!(back.trajectory.initial_terms, c.trajectory.initial_terms);
        assert_eq!(back.params, c.params);
        assert_eq!((back.tau, back.t_end), (0.25, 0.5));
    }

    #[test]
    fn corrupt_input_rejected() {
        let mut buf = Vec::new();
        sample().to_writer(&mut buf).unwrap();
        assert!(Checkpoint::from_reader(&buf[..buf.len() - 3]).is_err());
        let mut extra = buf.clone();
        extra.push(0);
        assert!(Checkpoint::from_reader(extra.as_slice()).is_err());
        let mut magic = buf.clone();
        magic[0] = b'X';
        assert!(matches!(
            Checkpoint::from_reader(magic.as_slice()),
            Err(Error::Format { .. })
        ));
    }
}
