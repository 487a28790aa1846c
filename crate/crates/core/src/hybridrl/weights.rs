//! Flat binary dump of the agent's networks.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic        8 bytes   b"HNETWTS\0"
//! version      u32       1
//! networks     u32       2 (Q network, then policy network)
//! per network:
//!   layers     u32       number of layer sizes L (input + hidden + output)
//!   sizes      L x u32
//!   params     f64 LE    per layer: weights out x in row-major, then biases
//! ```

use super::mlp::Mlp;
use crate::{Error, Result};

pub const MAGIC: &[u8; 8] = b"HNETWTS\0";
pub const VERSION: u32 = 1;

pub fn encode(networks: &[&Mlp]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(networks.len() as u32).to_le_bytes());
    for net in networks {
        out.extend_from_slice(&(net.sizes().len() as u32).to_le_bytes());
        for &s in net.sizes() {
            out.extend_from_slice(&(s as u32).to_le_bytes());
        }
        for p in net.params() {
            out.extend_from_slice(&p.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::WeightFormat(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Vec<Mlp>> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::WeightFormat("bad magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::WeightFormat(format!(
            "unsupported version {version}"
        )));
    }
    let count = r.u32()?;
    let mut nets = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let layers = r.u32()? as usize;
        if layers < 2 {
            return Err(Error::WeightFormat(
                "a network needs at least two layer sizes".into(),
            ));
        }
        let sizes = (0..layers)
            .map(|_| r.u32().map(|s| s as usize))
            .collect::<Result<Vec<_>>>()?;
        let n: usize = sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        let params = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        nets.push(Mlp::from_params(&sizes, params).expect("size checked"));
    }
    if r.pos != bytes.len() {
        return Err(Error::WeightFormat(format!(
            "{} trailing bytes",
            bytes.len() - r.pos
        )));
    }
    Ok(nets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_rng;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let net = Mlp::from_params(&[1, 1], vec![0.5, -2.0]).unwrap();
        let bytes = encode(&[&net]);
        assert_eq!(&bytes[..8], b"HNETWTS\0");
        assert_eq!(&bytes[8..12], &1u32.to_le_bytes());
        assert_eq!(&bytes[12..16], &1u32.to_le_bytes());
        assert_eq!(&bytes[16..20], &2u32.to_le_bytes());
        assert_eq!(&bytes[28..36], &0.5f64.to_le_bytes());
        assert_eq!(bytes.len(), 8 + 4 + 4 + 4 + 8 + 16);
    }

    #[test]
    fn rejects_corruption() {
        let net = Mlp::zeros(&[2, 3]);
        let mut bytes = encode(&[&net]);
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
        bytes.push(0);
        assert!(decode(&bytes).is_err());
        bytes[0] = b'X';
        assert!(decode(&bytes).is_err());
    }

    proptest! {
        #[test]
        fn round_trip(seed in any::<u64>(), hidden in 1usize..8) {
            let mut rng = derive_rng(seed, "w", 0);
            let a = Mlp::random(&[3, hidden, 2], &mut rng);
            let b = Mlp::random(&[2, 1], &mut rng);
            let nets = decode(&encode(&[&a, &b])).unwrap();
            prop_assert_eq!(nets, vec![a, b]);
        }
    }
}
