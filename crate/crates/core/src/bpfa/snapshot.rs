use std::io::{Read, Write};

use crate::error::{Error, Result};

use super::state::BpfaState;

const MAGIC: &[u8; 4] = b"BPFA";

/// Learned dictionary with its atom probabilities and precisions.
#[derive(Debug, Clone, PartialEq)]
pub struct DictionarySnapshot {
    pub atoms: usize,
    pub patch_size: usize,
    pub gamma_n: f64,
    pub gamma_w: f64,
    /// `atoms x patch_size²`, atom-major.
    pub dictionary: Vec<f64>,
    pub pi: Vec<f64>,
}

impl DictionarySnapshot {
    pub fn from_state(state: &BpfaState) -> Result<Self> {
        let p = state.patch_len();
        let b = (p as f64).sqrt().round() as usize;
        if b * b != p {
            return Err(Error::InvalidParameter(format!("patch length {p} is not a square")));
        }
        Ok(Self {
            atoms: state.atoms(),
            patch_size: b,
            gamma_n: state.gamma_n(),
            gamma_w: state.gamma_w(),
            dictionary: state.dictionary().to_vec(),
            pi: state.pi().to_vec(),
        })
    }

    /// Copies dictionary, probabilities and precisions into `state`.
    pub fn apply_to(&self, state: &mut BpfaState) -> Result<()> {
        if state.atoms() != self.atoms || state.patch_len() != self.patch_size * self.patch_size {
            return Err(Error::InvalidParameter(format!(
                "snapshot of {} atoms of size {} does not match the state",
                self.atoms, self.patch_size
            )));
        }
        state.set_dictionary(&self.dictionary)?;
        state.set_pi(&self.pi)?;
        state.set_precisions(self.gamma_n, self.gamma_w)
    }
}

pub fn write_snapshot<W: Write>(snapshot: &DictionarySnapshot, mut out: W) -> Result<()> {
    let k = u32::try_from(snapshot.atoms).map_err(|_| Error::Format("too many atoms".into()))?;
    let b = u32::try_from(snapshot.patch_size).map_err(|_| Error::Format("patch too large".into()))?;
    let p = snapshot.patch_size * snapshot.patch_size;
    if snapshot.dictionary.len() != snapshot.atoms * p || snapshot.pi.len() != snapshot.atoms {
        return Err(Error::Format("snapshot arrays do not match K and B".into()));
    }
    let mut buf = Vec::with_capacity(28 + 8 * (snapshot.dictionary.len() + snapshot.pi.len()));
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&k.to_le_bytes());
    buf.extend_from_slice(&b.to_le_bytes());
    buf.extend_from_slice(&snapshot.gamma_n.to_le_bytes());
    buf.extend_from_slice(&snapshot.gamma_w.to_le_bytes());
    for v in snapshot.dictionary.iter().chain(&snapshot.pi) {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn read_snapshot<R: Read>(mut input: R) -> Result<DictionarySnapshot> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    if bytes.len() < 28 || &bytes[..4] != MAGIC {
        return Err(Error::Format("not a BPFA snapshot".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let atoms = u32_at(4);
    let patch_size = u32_at(8);
    let p = patch_size * patch_size;
    let expected = 28 + 8 * (atoms * p + atoms);
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "snapshot has {} bytes, expected {expected} for K={atoms}, B={patch_size}",
            bytes.len()
        )));
    }
    let values: Vec<f64> = (0..atoms * p + atoms).map(|j| f64_at(28 + 8 * j)).collect();
    let (dictionary, pi) = values.split_at(atoms * p);
    Ok(DictionarySnapshot {
        atoms,
        patch_size,
        gamma_n: f64_at(12),
        gamma_w: f64_at(20),
        dictionary: dictionary.to_vec(),
        pi: pi.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> DictionarySnapshot {
        DictionarySnapshot {
            atoms: 2,
            patch_size: 2,
            gamma_n: 400.0,
            gamma_w: 1.5,
            dictionary: (0..8).map(|v| v as f64 * 0.125 - 0.5).collect(),
            pi: vec![0.9, 0.01],
        }
    }

    #[test]
    fn layout() {
        let mut buf = Vec::new();
        write_snapshot(&sample(), &mut buf).unwrap();
        assert_eq!(buf.len(), 28 + 8 * 10);
        assert_eq!(&buf[..4], b"BPFA");
        assert_eq!(&buf[4..8], &2u32.to_le_bytes());
        assert_eq!(&buf[12..20], &400f64.to_le_bytes());
        assert_eq!(&buf[buf.len() - 8..], &0.01f64.to_le_bytes());
    }

    #[test]
    fn round_trip() {
        let mut buf = Vec::new();
        write_snapshot(&sample(), &mut buf).unwrap();
        assert_eq!(read_snapshot(&buf[..]).unwrap(), sample());
    }

    #[test]
    fn rejects_truncated() {
        let mut buf = Vec::new();
        write_snapshot(&sample(), &mut buf).unwrap();
        assert!(read_snapshot(&buf[..buf.len() - 1]).is_err());
        assert!(read_snapshot(&b"XXXX"[..]).is_err());
    }
}
