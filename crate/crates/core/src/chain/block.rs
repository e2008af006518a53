use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ChainError, ThreatEvent};
use crate::ids::NodeId;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub index: u64,
    #[serde(with = "crate::hexbytes")]
    pub prev_hash: [u8; 32],
    #[serde(with = "crate::hexbytes")]
    pub tx_digest: [u8; 32],
    pub transactions: Vec<ThreatEvent>,
    pub proposer_id: NodeId,
    pub timestamp_ms: i64,
    #[serde(with = "crate::hexbytes")]
    pub block_hash: [u8; 32],
}

pub fn genesis_prev_hash() -> [u8; 32] {
    [0; 32]
}

/// SHA-256 over a fixed-width little-endian encoding of every event field.
pub fn transaction_digest(e: &ThreatEvent) -> [u8; 32] {
    let s = &e.signature;
    let mut h = Sha256::new();
    h.update(b"haven.tx.v1");
    h.update(s.digest);
    h.update(s.severity.to_bits().to_le_bytes());
    h.update([s.threat_level.code(), s.attack_class.code()]);
    h.update(s.vehicle_id.0.to_le_bytes());
    h.update(s.region_id.0.to_le_bytes());
    h.update(s.timestamp_ms.to_le_bytes());
    h.update(e.severity.to_bits().to_le_bytes());
    h.update(e.cross_regional_frequency.to_le_bytes());
    h.update(e.consensus_confidence.to_bits().to_le_bytes());
    h.update(e.observed_at_ms.to_le_bytes());
    h.finalize().into()
}

fn transactions_digest(txs: &[ThreatEvent]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"haven.txs.v1");
    h.update((txs.len() as u64).to_le_bytes());
    for tx in txs {
        h.update(transaction_digest(tx));
    }
    h.finalize().into()
}

pub fn block_hash(
    index: u64,
    prev: &[u8; 32],
    tx_digest: &[u8; 32],
    proposer: NodeId,
    timestamp_ms: i64,
) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"haven.block.v1");
    h.update(index.to_le_bytes());
    h.update(prev);
    h.update(tx_digest);
    h.update(proposer.0.to_le_bytes());
    h.update(timestamp_ms.to_le_bytes());
    h.finalize().into()
}

/// Takes up to `batch_size` events from the front of `pending` and seals
/// them into the block following `prev` (or a genesis block).
pub fn assemble_block(
    pending: &mut Vec<ThreatEvent>,
    prev: Option<&Block>,
    proposer: NodeId,
    now_ms: i64,
    batch_size: usize,
) -> Result<Block, ChainError> {
    if batch_size == 0 {
        return Err(ChainError::ZeroBatch);
    }
    if pending.is_empty() {
        return Err(ChainError::EmptyPending);
    }
    let take = batch_size.min(pending.len());
    let transactions: Vec<ThreatEvent> = pending.drain(..take).collect();
    let (index, prev_hash) = prev.map_or((0, genesis_prev_hash()), |b| (b.index + 1, b.block_hash));
    let tx_digest = transactions_digest(&transactions);
    Ok(Block {
        index,
        prev_hash,
        tx_digest,
        block_hash: block_hash(index, &prev_hash, &tx_digest, proposer, now_ms),
        transactions,
        proposer_id: proposer,
        timestamp_ms: now_ms,
    })
}

/// Recomputes every digest and link. The empty chain is valid.
pub fn verify_chain(chain: &[Block]) -> bool {
    let mut prev = genesis_prev_hash();
    for (i, b) in chain.iter().enumerate() {
        if b.index != i as u64 || b.prev_hash != prev {
            return false;
        }
        if b.tx_digest != transactions_digest(&b.transactions) {
            return false;
        }
        if b.block_hash
            != block_hash(
                b.index,
                &b.prev_hash,
                &b.tx_digest,
                b.proposer_id,
                b.timestamp_ms,
            )
        {
            return false;
        }
        prev = b.block_hash;
    }
    true
}

/// One JSON object per line, hashes hex-encoded.
pub fn write_ledger_jsonl(mut w: impl Write, chain: &[Block]) -> Result<(), ChainError> {
    for b in chain {
        serde_json::to_writer(&mut w, b)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn export_ledger_jsonl(path: impl AsRef<Path>, chain: &[Block]) -> Result<(), ChainError> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_ledger_jsonl(&mut f, chain)?;
    f.flush()?;
    Ok(())
}

pub fn read_ledger_jsonl(r: impl std::io::Read) -> Result<Vec<Block>, ChainError> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(r).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|source| ChainError::Parse {
                line: i + 1,
                source,
            })?,
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::super::testing::event;
    use super::*;

    fn chain(blocks: usize, per_block: usize) -> Vec<Block> {
        let mut pending: Vec<ThreatEvent> = (0..blocks * per_block)
            .map(|i| event(0.9, 0, 0.5, i as i64))
            .collect();
        let mut out: Vec<Block> = Vec::new();
        while !pending.is_empty() {
            let b = assemble_block(
                &mut pending,
                out.last(),
                NodeId(out.len() as u32 % 4),
                1000 * out.len() as i64,
                per_block,
            )
            .unwrap();
            out.push(b);
        }
        out
    }

    #[test]
    fn forty_five_events_make_nine_blocks() {
        let c = chain(9, 5);
        assert_eq!(c.len(), 9);
        assert!(c.iter().all(|b| b.transactions.len() == 5));
        assert_eq!(c[0].prev_hash, [0; 32]);
        assert!(verify_chain(&c));
    }

    #[test]
    fn single_event_block() {
        let mut p = vec![event(0.9, 0, 0.0, 1)];
        let b = assemble_block(&mut p, None, NodeId(0), 0, 5).unwrap();
        assert_eq!(b.transactions.len(), 1);
        assert!(p.is_empty());
        assert!(matches!(
            assemble_block(&mut p, None, NodeId(0), 0, 5),
            Err(ChainError::EmptyPending)
        ));
    }

    #[test]
    fn tampering_is_detected() {
        let good = chain(10, 2);
        assert!(verify_chain(&good));
        assert!(verify_chain(&[]));

        let mut c = good.clone();
        c[3].tx_digest[0] ^= 1;
        assert!(!verify_chain(&c));

        let mut c = good.clone();
        c[5].transactions[1].severity = 0.90000001;
        assert!(!verify_chain(&c));

        let mut c = good.clone();
        c[2].transactions[0].signature.digest[31] ^= 0x80;
        assert!(!verify_chain(&c));

        let mut c = good;
        c.swap(1, 2);
        assert!(!verify_chain(&c));
    }

    #[test]
    fn jsonl_roundtrip() {
        let c = chain(3, 2);
        let mut buf = Vec::new();
        write_ledger_jsonl(&mut buf, &c).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.contains(&hex::encode(c[0].block_hash)));
        assert_eq!(read_ledger_jsonl(&buf[..]).unwrap(), c);
    }
}
