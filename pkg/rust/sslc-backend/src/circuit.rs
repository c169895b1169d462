//! Step and reduce circuits for the map-reduce membership relation.
//!
//! Public input layout of a step proof (before the cyclic verifier data):
//!   spec(8) | roots_acc(4) | block_index | block_root(4) | carry(4) | sum | count | step
//! Public input layout of the final (reduce) proof:
//!   roots_acc(4) | k | numerator | denominator | spec_digest(4)

use anyhow::{anyhow, Result};
use plonky2::field::goldilocks_field::GoldilocksField;
use plonky2::field::types::Field;
use plonky2::gates::noop::NoopGate;
use plonky2::hash::hashing::PlonkyPermutation;
use plonky2::hash::poseidon::{PoseidonHash, PoseidonPermutation};
use plonky2::iop::target::{BoolTarget, Target};
use plonky2::plonk::circuit_builder::CircuitBuilder;
use plonky2::plonk::circuit_data::{
    CircuitConfig, CircuitData, CommonCircuitData, VerifierCircuitTarget,
};
use plonky2::plonk::config::PoseidonGoldilocksConfig;
use plonky2::plonk::proof::ProofWithPublicInputsTarget;

pub const D: usize = 2;
pub type C = PoseidonGoldilocksConfig;
pub type F = GoldilocksField;

pub const NUM_LIMBS: usize = 15;
pub const SPEC_LEN: usize = 8;

pub const TAG_TX_LEAF: u64 = 1;
pub const TAG_NODE: u64 = 2;
pub const TAG_SINGLE_CHILD: u64 = 3;
pub const TAG_LEAF_ROOT: u64 = 4;
pub const TAG_ROOTS_ACC: u64 = 5;
pub const TAG_SPEC: u64 = 6;

// step public input offsets
pub const PI_SPEC: usize = 0;
pub const PI_ROOTS_ACC: usize = 8;
pub const PI_BLOCK_INDEX: usize = 12;
pub const PI_ROOT: usize = 13;
pub const PI_CARRY: usize = 17;
pub const PI_SUM: usize = 21;
pub const PI_COUNT: usize = 22;
pub const PI_STEP: usize = 23;


type Hash4 = [Target; 4];

/// Sponge with the domain tag and input length written into the capacity.
pub fn sponge(b: &mut CircuitBuilder<F, D>, inputs: &[Target], tag: u64) -> Hash4 {
    let zero = b.zero();
    let mut state = PoseidonPermutation::<Target>::new(core::iter::repeat(zero));
    let tag_t = b.constant(F::from_canonical_u64(tag));
    let len_t = b.constant(F::from_canonical_u64(inputs.len() as u64));
    state.set_elt(tag_t, 8);
    state.set_elt(len_t, 9);
    for chunk in inputs.chunks(8) {
        state.set_from_slice(chunk, 0);
        state = b.permute::<PoseidonHash>(state);
    }
    let out = state.squeeze();
    [out[0], out[1], out[2], out[3]]
}

fn select4(b: &mut CircuitBuilder<F, D>, c: BoolTarget, x: Hash4, y: Hash4) -> Hash4 {
    core::array::from_fn(|i| b.select(c, x[i], y[i]))
}

fn virtual4(b: &mut CircuitBuilder<F, D>) -> Hash4 {
    core::array::from_fn(|_| b.add_virtual_target())
}

fn assert_one_if(b: &mut CircuitBuilder<F, D>, cond: BoolTarget, x: BoolTarget) {
    let one = b.one();
    b.conditional_assert_eq(cond.target, x.target, one);
}

/// Canonical (lo, hi) 32-bit decomposition of a field element.
fn decompose(b: &mut CircuitBuilder<F, D>, x: Target) -> (Target, Target) {
    let (lo, hi) = b.split_low_high(x, 32, 64);
    // hi == 2^32 - 1 forces lo == 0, otherwise x + p would also decompose.
    let max_hi = b.constant(F::from_canonical_u64(0xFFFF_FFFF));
    let at_max = b.is_equal(hi, max_hi);
    let z = b.mul(at_max.target, lo);
    b.assert_zero(z);
    (lo, hi)
}

fn lt32(b: &mut CircuitBuilder<F, D>, x: Target, y: Target) -> BoolTarget {
    let shift = b.constant(F::from_canonical_u64(1u64 << 32));
    let t = b.add(x, shift);
    let t = b.sub(t, y);
    let bits = b.split_le(t, 33);
    b.not(bits[32])
}

type Decomp = [(Target, Target); 4];

fn decompose_digest(b: &mut CircuitBuilder<F, D>, h: &Hash4) -> Decomp {
    core::array::from_fn(|i| decompose(b, h[i]))
}

/// Lexicographic strict less-than over four canonical elements.
fn digest_lt(b: &mut CircuitBuilder<F, D>, x: &Hash4, xd: &Decomp, y: &Hash4, yd: &Decomp) -> BoolTarget {
    let mut acc: Option<BoolTarget> = None;
    for j in (0..4).rev() {
        let (xl, xh) = xd[j];
        let (yl, yh) = yd[j];
        let hi_lt = lt32(b, xh, yh);
        let hi_eq = b.is_equal(xh, yh);
        let lo_lt = lt32(b, xl, yl);
        let t = b.and(hi_eq, lo_lt);
        let lt_j = b.or(hi_lt, t);
        acc = Some(match acc {
            None => lt_j,
            Some(rest) => {
                let eq_j = b.is_equal(x[j], y[j]);
                let t = b.and(eq_j, rest);
                b.or(lt_j, t)
            }
        });
    }
    acc.unwrap()
}

pub struct SlotTargets {
    pub enabled: BoolTarget,
    pub limbs: [Target; NUM_LIMBS],
    pub siblings: Vec<Hash4>,
    pub bits: Vec<BoolTarget>,
    pub active: Vec<BoolTarget>,
    pub missing: Vec<BoolTarget>,
}

pub struct PrevState {
    pub roots_acc: Hash4,
    pub block_index: Target,
    pub root: Hash4,
    pub carry: Hash4,
    pub sum: Target,
    pub count: Target,
    pub step: Target,
}

impl PrevState {
    fn new_virtual(b: &mut CircuitBuilder<F, D>) -> Self {
        PrevState {
            roots_acc: virtual4(b),
            block_index: b.add_virtual_target(),
            root: virtual4(b),
            carry: virtual4(b),
            sum: b.add_virtual_target(),
            count: b.add_virtual_target(),
            step: b.add_virtual_target(),
        }
    }
}

pub struct StepTargets {
    pub condition: BoolTarget,
    pub spec: [Target; SPEC_LEN],
    pub block_index: Target,
    pub root: Hash4,
    pub new_block: BoolTarget,
    pub slots: Vec<SlotTargets>,
    pub prev: PrevState,
}

/// Batch logic shared by the cyclic circuit and the padding template used to derive its
/// common data. Registers the step public inputs.
fn build_body(b: &mut CircuitBuilder<F, D>, capacity: usize, depth: usize) -> StepTargets {
    let condition = b.add_virtual_bool_target_safe();
    let prev = PrevState::new_virtual(b);
    let spec: [Target; SPEC_LEN] = core::array::from_fn(|_| b.add_virtual_target());
    let block_index = b.add_virtual_target();
    let root = virtual4(b);
    let new_block = b.add_virtual_bool_target_safe();
    let one = b.one();
    let zero = b.zero();

    let pred_is_tag = BoolTarget::new_unsafe(spec[0]);
    b.assert_bool(pred_is_tag);

    // the base case must open a block
    let not_cond = b.not(condition);
    let not_new = b.not(new_block);
    let bad = b.and(not_cond, not_new);
    b.assert_zero(bad.target);

    // continuation batches stay on the previous block
    b.conditional_assert_eq(not_new.target, block_index, prev.block_index);
    for j in 0..4 {
        b.conditional_assert_eq(not_new.target, root[j], prev.root[j]);
    }
    // new blocks strictly after the previous one
    b.range_check(block_index, 32);
    let gap = b.sub(block_index, prev.block_index);
    let gap = b.sub(gap, one);
    let check_gap = b.and(new_block, condition);
    let gap = b.select(check_gap, gap, zero);
    b.range_check(gap, 32);

    let mut acc_in = prev.roots_acc.to_vec();
    acc_in.push(block_index);
    acc_in.extend_from_slice(&root);
    let acc_new = sponge(b, &acc_in, TAG_ROOTS_ACC);
    let roots_acc = select4(b, new_block, acc_new, prev.roots_acc);

    let two62 = b.constant(F::from_canonical_u64(1u64 << 62));
    let mut sum = prev.sum;
    let mut count = prev.count;
    let mut carry = prev.carry;
    let mut last = prev.carry;
    let mut last_d = decompose_digest(b, &prev.carry);
    let mut prev_enabled: Option<BoolTarget> = None;
    let mut slots = Vec::with_capacity(capacity);

    for i in 0..capacity {
        let enabled = b.add_virtual_bool_target_safe();
        match prev_enabled {
            None => b.assert_one(enabled.target),
            Some(pe) => {
                let not_pe = b.not(pe);
                let t = b.and(enabled, not_pe);
                b.assert_zero(t.target);
            }
        }
        let limbs: [Target; NUM_LIMBS] = core::array::from_fn(|_| b.add_virtual_target());
        let h = sponge(b, &limbs, TAG_TX_LEAF);

        let mut siblings = Vec::with_capacity(depth);
        let mut bits = Vec::with_capacity(depth);
        let mut active = Vec::with_capacity(depth);
        let mut missing = Vec::with_capacity(depth);
        let mut cur = h;
        for l in 0..depth {
            let sib = virtual4(b);
            let bit = b.add_virtual_bool_target_safe();
            let act = b.add_virtual_bool_target_safe();
            let miss = b.add_virtual_bool_target_safe();
            let t = b.and(miss, bit);
            b.assert_zero(t.target);
            let not_act = b.not(act);
            let t = b.and(miss, not_act);
            b.assert_zero(t.target);
            if l > 0 {
                let not_prev_act = b.not(active[l - 1]);
                let t = b.and(act, not_prev_act);
                b.assert_zero(t.target);
            }
            let left = select4(b, bit, sib, cur);
            let right = select4(b, bit, cur, sib);
            let mut pair = left.to_vec();
            pair.extend_from_slice(&right);
            let h2 = sponge(b, &pair, TAG_NODE);
            let h1 = sponge(b, &cur, TAG_SINGLE_CHILD);
            let cand = select4(b, miss, h1, h2);
            cur = select4(b, act, cand, cur);
            siblings.push(sib);
            bits.push(bit);
            active.push(act);
            missing.push(miss);
        }
        let lone = sponge(b, &h, TAG_LEAF_ROOT);
        let computed_root = if depth > 0 { select4(b, active[0], cur, lone) } else { lone };
        for j in 0..4 {
            b.conditional_assert_eq(enabled.target, computed_root[j], root[j]);
        }

        // predicate: account touch, optionally narrowed to one payload tag
        let mut sender_eq = b._true();
        let mut receiver_eq = b._true();
        for j in 0..5 {
            let e = b.is_equal(limbs[j], spec[1 + j]);
            sender_eq = b.and(sender_eq, e);
            let e = b.is_equal(limbs[5 + j], spec[1 + j]);
            receiver_eq = b.and(receiver_eq, e);
        }
        let touch = b.or(sender_eq, receiver_eq);
        let tag_eq = b.is_equal(limbs[14], spec[6]);
        let not_tag = b.not(pred_is_tag);
        let tag_ok = b.or(tag_eq, not_tag);
        let matched = b.and(touch, tag_ok);
        b.conditional_assert_eq(enabled.target, matched.target, one);

        let amount = b.mul_add(limbs[11], two62, limbs[10]);
        sum = b.mul_add(enabled.target, amount, sum);
        count = b.add(count, enabled.target);

        // strict ascending tx_hash order, carried across batches of one block
        let hd = decompose_digest(b, &h);
        let gt = digest_lt(b, &last, &last_d, &h, &hd);
        let check = if i == 0 { not_new } else { enabled };
        assert_one_if(b, check, gt);
        last = h;
        last_d = hd;
        carry = select4(b, enabled, h, carry);

        slots.push(SlotTargets { enabled, limbs, siblings, bits, active, missing });
        prev_enabled = Some(enabled);
    }

    let step = b.add(prev.step, one);

    b.register_public_inputs(&spec);
    b.register_public_inputs(&roots_acc);
    b.register_public_input(block_index);
    b.register_public_inputs(&root);
    b.register_public_inputs(&carry);
    b.register_public_input(sum);
    b.register_public_input(count);
    b.register_public_input(step);

    StepTargets { condition, spec, block_index, root, new_block, slots, prev }
}

pub struct StepCircuit {
    pub data: CircuitData<F, C, D>,
    pub targets: StepTargets,
    pub inner: ProofWithPublicInputsTarget<D>,
    pub verifier_data: VerifierCircuitTarget,
}

/// Common data of a circuit containing the batch body plus one recursive verification,
/// padded to 2^degree_bits rows.
fn template_common(capacity: usize, depth: usize, degree_bits: usize) -> CommonCircuitData<F, D> {
    let config = CircuitConfig::standard_recursion_config();
    let mut b = CircuitBuilder::<F, D>::new(config.clone());
    build_body(&mut b, capacity, depth);
    let data = b.build::<C>();

    let mut common = data.common;
    for _ in 0..2 {
        let mut b = CircuitBuilder::<F, D>::new(config.clone());
        build_body(&mut b, capacity, depth);
        let proof = b.add_virtual_proof_with_pis(&common);
        let vd = b.add_virtual_verifier_data(common.config.fri_config.cap_height);
        b.verify_proof::<C>(&proof, &vd, &common);
        while b.num_gates() < (1 << degree_bits) - 64 {
            b.add_gate(NoopGate, vec![]);
        }
        common = b.build::<C>().common;
    }
    common
}

fn try_build_step(capacity: usize, depth: usize, degree_bits: usize) -> Result<Option<StepCircuit>> {
    let mut common = template_common(capacity, depth, degree_bits);
    if common.degree_bits() != degree_bits {
        return Ok(None);
    }
    let config = CircuitConfig::standard_recursion_config();
    let mut b = CircuitBuilder::<F, D>::new(config);
    let targets = build_body(&mut b, capacity, depth);
    let verifier_data = b.add_verifier_data_public_inputs();
    common.num_public_inputs = b.num_public_inputs();

    let inner = b.add_virtual_proof_with_pis(&common);
    let pis = inner.public_inputs.clone();
    let cond = targets.condition;
    let zero = b.zero();
    let pick = |b: &mut CircuitBuilder<F, D>, dst: Target, src: Target| {
        let v = b.select(cond, src, zero);
        b.connect(dst, v);
    };
    let p = &targets.prev;
    for j in 0..4 {
        pick(&mut b, p.roots_acc[j], pis[PI_ROOTS_ACC + j]);
        pick(&mut b, p.root[j], pis[PI_ROOT + j]);
        pick(&mut b, p.carry[j], pis[PI_CARRY + j]);
    }
    pick(&mut b, p.block_index, pis[PI_BLOCK_INDEX]);
    pick(&mut b, p.sum, pis[PI_SUM]);
    pick(&mut b, p.count, pis[PI_COUNT]);
    pick(&mut b, p.step, pis[PI_STEP]);
    for j in 0..SPEC_LEN {
        b.conditional_assert_eq(cond.target, targets.spec[j], pis[PI_SPEC + j]);
    }
    b.conditionally_verify_cyclic_proof_or_dummy::<C>(cond, &inner, &common)?;

    let min_rows = 1usize << (degree_bits - 1);
    if b.num_gates() >= (1 << degree_bits) {
        return Ok(None);
    }
    while b.num_gates() <= min_rows {
        b.add_gate(NoopGate, vec![]);
    }
    let (data, ok) = b.try_build_with_options::<C>(true);
    if !ok {
        return Ok(None);
    }
    Ok(Some(StepCircuit { data, targets, inner, verifier_data }))
}

pub fn build_step(capacity: usize, depth: usize) -> Result<StepCircuit> {
    let config = CircuitConfig::standard_recursion_config();
    let mut b = CircuitBuilder::<F, D>::new(config);
    build_body(&mut b, capacity, depth);
    let body_rows = b.num_gates();
    // a recursive verifier needs roughly 2^12 rows on this configuration
    let mut degree_bits = (body_rows + (1 << 12)).next_power_of_two().trailing_zeros() as usize;
    for _ in 0..4 {
        if let Some(c) = try_build_step(capacity, depth, degree_bits)? {
            return Ok(c);
        }
        degree_bits += 1;
    }
    Err(anyhow!("could not fit step circuit for shape ({capacity}, {depth})"))
}

pub struct ReduceCircuit {
    pub data: CircuitData<F, C, D>,
    pub inner: ProofWithPublicInputsTarget<D>,
}

pub fn build_reduce(step: &CircuitData<F, C, D>) -> ReduceCircuit {
    let config = CircuitConfig::standard_recursion_config();
    let mut b = CircuitBuilder::<F, D>::new(config);
    let inner = b.add_virtual_proof_with_pis(&step.common);
    let vd = b.constant_verifier_data(&step.verifier_only);
    b.verify_proof::<C>(&inner, &vd, &step.common);

    // the verifier data carried in the cyclic public inputs must be the step circuit's own
    let pis = inner.public_inputs.clone();
    let cap = &vd.constants_sigmas_cap.0;
    let n = pis.len();
    let vk_start = n - 4 - 4 * cap.len();
    for j in 0..4 {
        b.connect(pis[vk_start + j], vd.circuit_digest.elements[j]);
    }
    for (i, h) in cap.iter().enumerate() {
        for j in 0..4 {
            b.connect(pis[vk_start + 4 + 4 * i + j], h.elements[j]);
        }
    }

    let spec: Vec<Target> = pis[PI_SPEC..PI_SPEC + SPEC_LEN].to_vec();
    let spec_digest = sponge(&mut b, &spec, TAG_SPEC);
    let sum = pis[PI_SUM];
    let count = pis[PI_COUNT];
    let finalize = spec[SPEC_LEN - 1];
    let k_avg = b.constant(F::ZERO);
    let k_count = b.constant(F::TWO);
    let is_avg = b.is_equal(finalize, k_avg);
    let is_count = b.is_equal(finalize, k_count);
    let one = b.one();
    let num = b.select(is_count, count, sum);
    let den = b.select(is_avg, count, one);

    b.register_public_inputs(&pis[PI_ROOTS_ACC..PI_ROOTS_ACC + 4]);
    b.register_public_input(count);
    b.register_public_input(num);
    b.register_public_input(den);
    b.register_public_inputs(&spec_digest);

    let data = b.build::<C>();
    ReduceCircuit { data, inner }
}
