//! Line-oriented JSON worker exposing the recursive prover to the Python package.
//!
//! One request per stdin line, one response per stdout line. Circuits are built once per
//! (batch_capacity, tree_depth) shape and cached for the life of the process.

mod circuit;

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use plonky2::field::types::{Field, PrimeField64};
use plonky2::hash::hashing::PlonkyPermutation;
use plonky2::hash::poseidon::PoseidonPermutation;
use plonky2::iop::witness::{PartialWitness, WitnessWrite};
use plonky2::plonk::proof::ProofWithPublicInputs;
use plonky2::recursion::cyclic_recursion::check_cyclic_proof_verifier_data;
use plonky2::recursion::dummy_circuit::cyclic_base_proof;
use serde::Deserialize;
use serde_json::{json, Value};

use circuit::*;

type Proof = ProofWithPublicInputs<F, C, D>;

#[derive(Deserialize)]
struct TxIn {
    limbs: Vec<u64>,
    siblings: Vec<[u64; 4]>,
    bits: Vec<bool>,
    active: Vec<bool>,
    missing: Vec<bool>,
}

#[derive(Deserialize)]
struct BatchIn {
    block_index: u64,
    root: [u64; 4],
    new_block: bool,
    spec: Vec<u64>,
    txs: Vec<TxIn>,
}

#[derive(Deserialize)]
struct ProofIn {
    proof: String,
    public_inputs: Vec<u64>,
}

struct Shape {
    capacity: usize,
    depth: usize,
    step: StepCircuit,
    reduce: ReduceCircuit,
    // the dummy inner proof for base steps depends only on the shape
    base_dummy: std::cell::OnceCell<Proof>,
}

#[derive(Debug)]
enum Failure {
    Unsatisfiable(String),
    InvalidPredecessor(String),
    Malformed(String),
}

fn fe(x: u64) -> Result<F> {
    if x >= 0xFFFF_FFFF_0000_0001 {
        bail!("non-canonical field element {x}");
    }
    Ok(F::from_canonical_u64(x))
}

fn to_u64s(v: &[F]) -> Vec<u64> {
    v.iter().map(|x| x.to_canonical_u64()).collect()
}

impl Shape {
    fn build(capacity: usize, depth: usize) -> Result<Self> {
        let step = build_step(capacity, depth)?;
        let reduce = build_reduce(&step.data);
        let shape = Shape { capacity, depth, step, reduce, base_dummy: Default::default() };
        shape.base_dummy();
        Ok(shape)
    }

    fn base_dummy(&self) -> &Proof {
        let t = &self.step.data;
        self.base_dummy.get_or_init(|| cyclic_base_proof(&t.common, &t.verifier_only, Default::default()))
    }

    fn describe(&self) -> Value {
        json!({
            "batch_capacity": self.capacity,
            "tree_depth": self.depth,
            "step_circuit_digest": to_u64s(&self.step.data.verifier_only.circuit_digest.elements),
            "reduce_circuit_digest": to_u64s(&self.reduce.data.verifier_only.circuit_digest.elements),
            "step_degree_bits": self.step.data.common.degree_bits(),
            "reduce_degree_bits": self.reduce.data.common.degree_bits(),
            "num_step_public_inputs": self.step.data.common.num_public_inputs,
        })
    }

    fn decode_proof(&self, p: &ProofIn, final_proof: bool) -> Result<Proof> {
        let bytes = B64.decode(&p.proof).context("proof is not base64")?;
        let common = if final_proof { &self.reduce.data.common } else { &self.step.data.common };
        let mut proof = Proof::from_bytes(bytes, common).map_err(|e| anyhow!("{e:?}"))?;
        if p.public_inputs.len() != common.num_public_inputs {
            bail!("expected {} public inputs, got {}", common.num_public_inputs, p.public_inputs.len());
        }
        proof.public_inputs = p.public_inputs.iter().map(|&x| fe(x)).collect::<Result<_>>()?;
        Ok(proof)
    }

    fn verify_step(&self, proof: &Proof) -> Result<()> {
        check_cyclic_proof_verifier_data(proof, &self.step.data.verifier_only, &self.step.data.common)?;
        self.step.data.verify(proof.clone())
    }

    fn fill_batch(&self, pw: &mut PartialWitness<F>, batch: &BatchIn) -> Result<()> {
        let t = &self.step.targets;
        if batch.txs.is_empty() || batch.txs.len() > self.capacity {
            bail!("batch size {} outside 1..={}", batch.txs.len(), self.capacity);
        }
        if batch.spec.len() != SPEC_LEN {
            bail!("spec must have {SPEC_LEN} elements");
        }
        for (tgt, v) in t.spec.iter().zip(&batch.spec) {
            pw.set_target(*tgt, fe(*v)?)?;
        }
        pw.set_target(t.block_index, F::from_canonical_u64(batch.block_index))?;
        for j in 0..4 {
            pw.set_target(t.root[j], fe(batch.root[j])?)?;
        }
        pw.set_bool_target(t.new_block, batch.new_block)?;
        for (i, slot) in t.slots.iter().enumerate() {
            match batch.txs.get(i) {
                Some(tx) => {
                    if tx.limbs.len() != NUM_LIMBS
                        || tx.siblings.len() != self.depth
                        || tx.bits.len() != self.depth
                        || tx.active.len() != self.depth
                        || tx.missing.len() != self.depth
                    {
                        bail!("transaction slot {i} has the wrong shape");
                    }
                    pw.set_bool_target(slot.enabled, true)?;
                    for (tgt, v) in slot.limbs.iter().zip(&tx.limbs) {
                        pw.set_target(*tgt, fe(*v)?)?;
                    }
                    for l in 0..self.depth {
                        for j in 0..4 {
                            pw.set_target(slot.siblings[l][j], fe(tx.siblings[l][j])?)?;
                        }
                        pw.set_bool_target(slot.bits[l], tx.bits[l])?;
                        pw.set_bool_target(slot.active[l], tx.active[l])?;
                        pw.set_bool_target(slot.missing[l], tx.missing[l])?;
                    }
                }
                None => {
                    pw.set_bool_target(slot.enabled, false)?;
                    for tgt in &slot.limbs {
                        pw.set_target(*tgt, F::ZERO)?;
                    }
                    for l in 0..self.depth {
                        for j in 0..4 {
                            pw.set_target(slot.siblings[l][j], F::ZERO)?;
                        }
                        pw.set_bool_target(slot.bits[l], false)?;
                        pw.set_bool_target(slot.active[l], false)?;
                        pw.set_bool_target(slot.missing[l], false)?;
                    }
                }
            }
        }
        Ok(())
    }

    fn prove_step(&self, prev: Option<&ProofIn>, batch: &BatchIn) -> std::result::Result<Proof, Failure> {
        let mut pw = PartialWitness::new();
        let t = &self.step;
        match prev {
            None => {
                pw.set_bool_target(t.targets.condition, false).map_err(|e| Failure::Malformed(e.to_string()))?;
                let base = self.base_dummy();
                pw.set_proof_with_pis_target::<C, D>(&t.inner, base)
                    .map_err(|e| Failure::Malformed(e.to_string()))?;
            }
            Some(p) => {
                let inner = self.decode_proof(p, false).map_err(|e| Failure::InvalidPredecessor(e.to_string()))?;
                self.verify_step(&inner).map_err(|e| Failure::InvalidPredecessor(e.to_string()))?;
                pw.set_bool_target(t.targets.condition, true).map_err(|e| Failure::Malformed(e.to_string()))?;
                pw.set_proof_with_pis_target(&t.inner, &inner).map_err(|e| Failure::Malformed(e.to_string()))?;
            }
        }
        pw.set_verifier_data_target(&t.verifier_data, &t.data.verifier_only)
            .map_err(|e| Failure::Malformed(e.to_string()))?;
        self.fill_batch(&mut pw, batch).map_err(|e| Failure::Malformed(e.to_string()))?;

        let proof = guarded(|| t.data.prove(pw)).map_err(Failure::Unsatisfiable)?;
        // a witness violating any constraint yields a proof that does not verify
        self.verify_step(&proof).map_err(|e| Failure::Unsatisfiable(e.to_string()))?;
        Ok(proof)
    }

    fn prove_reduce(&self, last: &ProofIn) -> std::result::Result<Proof, Failure> {
        let inner = self.decode_proof(last, false).map_err(|e| Failure::InvalidPredecessor(e.to_string()))?;
        self.verify_step(&inner).map_err(|e| Failure::InvalidPredecessor(e.to_string()))?;
        let mut pw = PartialWitness::new();
        pw.set_proof_with_pis_target(&self.reduce.inner, &inner)
            .map_err(|e| Failure::Malformed(e.to_string()))?;
        let proof = guarded(|| self.reduce.data.prove(pw)).map_err(Failure::Unsatisfiable)?;
        self.reduce.data.verify(proof.clone()).map_err(|e| Failure::Unsatisfiable(e.to_string()))?;
        Ok(proof)
    }
}

fn guarded<T>(f: impl FnOnce() -> Result<T>) -> std::result::Result<T, String> {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(v)) => Ok(v),
        Ok(Err(e)) => Err(e.to_string()),
        Err(p) => Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "prover panicked".into())),
    }
}

fn encode_proof(p: &Proof, elapsed: f64) -> Value {
    let bytes = p.to_bytes();
    json!({
        "proof": B64.encode(&bytes),
        "public_inputs": to_u64s(&p.public_inputs),
        "size_bytes": bytes.len(),
        "elapsed_s": elapsed,
    })
}

fn failure(f: Failure) -> Value {
    let (kind, detail) = match f {
        Failure::Unsatisfiable(d) => ("WitnessUnsatisfiable", d),
        Failure::InvalidPredecessor(d) => ("InvalidPredecessor", d),
        Failure::Malformed(d) => ("Malformed", d),
    };
    json!({"ok": false, "error": kind, "detail": detail})
}

struct Worker {
    shapes: HashMap<(usize, usize), Shape>,
}

impl Worker {
    fn shape(&mut self, req: &Value) -> Result<&Shape> {
        let c = req["batch_capacity"].as_u64().context("batch_capacity")? as usize;
        let d = req["tree_depth"].as_u64().context("tree_depth")? as usize;
        if c == 0 || d == 0 || d > 32 {
            bail!("UnsupportedShape ({c}, {d})");
        }
        if !self.shapes.contains_key(&(c, d)) {
            let s = Shape::build(c, d)?;
            self.shapes.insert((c, d), s);
        }
        Ok(&self.shapes[&(c, d)])
    }

    fn handle(&mut self, req: &Value) -> Result<Value> {
        let cmd = req["cmd"].as_str().context("missing cmd")?;
        match cmd {
            "ping" => Ok(json!({"ok": true})),
            "permute" => {
                let input: Vec<u64> = serde_json::from_value(req["state"].clone())?;
                if input.len() != 12 {
                    bail!("state must have 12 elements");
                }
                let mut perm = PoseidonPermutation::<F>::new(
                    input.iter().map(|&x| fe(x)).collect::<Result<Vec<_>>>()?,
                );
                perm.permute();
                Ok(json!({"ok": true, "state": to_u64s(perm.as_ref())}))
            }
            "setup" => {
                let start = Instant::now();
                let s = self.shape(req)?;
                let mut out = s.describe();
                out["ok"] = json!(true);
                out["elapsed_s"] = json!(start.elapsed().as_secs_f64());
                Ok(out)
            }
            "prove_base" | "prove_step" => {
                let batch: BatchIn = serde_json::from_value(req["batch"].clone())?;
                let prev: Option<ProofIn> = if cmd == "prove_step" {
                    Some(serde_json::from_value(req["prev"].clone())?)
                } else {
                    None
                };
                let s = self.shape(req)?;
                let start = Instant::now();
                Ok(match s.prove_step(prev.as_ref(), &batch) {
                    Ok(p) => {
                        let mut v = encode_proof(&p, start.elapsed().as_secs_f64());
                        v["ok"] = json!(true);
                        v
                    }
                    Err(f) => failure(f),
                })
            }
            "prove_reduce" => {
                let last: ProofIn = serde_json::from_value(req["last"].clone())?;
                let s = self.shape(req)?;
                let start = Instant::now();
                Ok(match s.prove_reduce(&last) {
                    Ok(p) => {
                        let mut v = encode_proof(&p, start.elapsed().as_secs_f64());
                        v["ok"] = json!(true);
                        v
                    }
                    Err(f) => failure(f),
                })
            }
            "verify" | "verify_step" => {
                let p: ProofIn = serde_json::from_value(req["proof"].clone())?;
                let s = self.shape(req)?;
                let start = Instant::now();
                let result = if cmd == "verify" {
                    s.decode_proof(&p, true)
                        .and_then(|proof| s.reduce.data.verify(proof))
                } else {
                    s.decode_proof(&p, false).and_then(|proof| s.verify_step(&proof))
                };
                let elapsed = start.elapsed().as_secs_f64();
                Ok(match result {
                    Ok(()) => json!({"ok": true, "valid": true, "elapsed_s": elapsed}),
                    Err(e) => json!({"ok": true, "valid": false, "detail": e.to_string(), "elapsed_s": elapsed}),
                })
            }
            other => bail!("unknown command {other}"),
        }
    }
}

fn main() -> Result<()> {
    std::panic::set_hook(Box::new(|_| {}));
    let stdin = std::io::stdin();
    let stdout = std::io::stdout();
    let mut worker = Worker { shapes: HashMap::new() };
    for line in stdin.lock().lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let resp = match serde_json::from_str::<Value>(&line) {
            Ok(req) => match guarded(|| worker.handle(&req)) {
                Ok(v) => v,
                Err(e) => json!({"ok": false, "error": "Malformed", "detail": e}),
            },
            Err(e) => json!({"ok": false, "error": "Malformed", "detail": e.to_string()}),
        };
        let mut out = stdout.lock();
        serde_json::to_writer(&mut out, &resp)?;
        out.write_all(b"\n")?;
        out.flush()?;
    }
    Ok(())
}
