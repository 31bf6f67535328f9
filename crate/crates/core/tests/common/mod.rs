//! Checks shared by the acceptance harness and the property tests.

#![allow(dead_code)]

use std::rc::Rc;

use mgnn::exp::{leakage_report, make_link_split, PlantedSpec};
use mgnn::mlgraph::supra_adjacency;
use mgnn::nn::{
    input_features, Aggregator, AggregatorKind, EdgeIndex, FeatureMode, Gat, GatConfig, GraphClassifier, IntraGat,
    LinkPredictor, Mgnn, MgnnConfig, NodeClassifier, SoftAttentionPool, SupraGraph,
};
use mgnn::tensor::{grad_check, param_grad_check};
use mgnn::{LayerGraph, MultilayerNetwork, ParamStore, Replica, Tape, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const AGGREGATORS: [AggregatorKind; 4] =
    [AggregatorKind::Sum, AggregatorKind::Mean, AggregatorKind::ConcatLinear, AggregatorKind::Mlp];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn model_cfg(in_dim: usize, agg: AggregatorKind, k: usize, n_layers: usize) -> MgnnConfig {
    MgnnConfig {
        in_dim,
        head_dim: 2,
        heads: 2,
        supra_layers: k,
        negative_slope: 0.2,
        dropout: 0.0,
        aggregator: agg,
        aggregator_hidden: 3,
        per_layer_intra: false,
        n_layers,
    }
}

pub fn random_layer(n: usize, p: f64, directed: bool, rng: &mut ChaCha8Rng) -> LayerGraph {
    let mut g = LayerGraph::new(n, directed);
    for i in 0..n {
        for j in 0..n {
            if (directed && i != j || j > i) && rng.gen::<f64>() < p {
                g.add_edge(i, j, 1.0).unwrap();
            }
        }
    }
    g
}

/// Random multiplex with clique coupling of random weight; layer 1 is
/// directed when `mixed` is set.
pub fn random_multiplex(n: usize, l: usize, p: f64, mixed: bool, rng: &mut ChaCha8Rng) -> MultilayerNetwork {
    let layers = (0..l).map(|a| random_layer(n, p, mixed && a == 1, rng)).collect();
    let w = rng.gen_range(0.2..2.0);
    MultilayerNetwork::new(n, layers).unwrap().build_multiplex_clique(w).unwrap()
}

pub fn rand_tensor(r: usize, c: usize, rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::new(r, c, (0..r * c).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

fn forward(model: &Mgnn, store: &ParamStore, graph: &SupraGraph, x: &Tensor) -> Tensor {
    let mut tape = Tape::new();
    let xv = tape.constant(x.clone());
    let out = model.forward(&mut tape, store, graph, xv, None).unwrap();
    tape.value(out).clone()
}

/// Largest deviation between `f(π·input)` and `π·f(input)` for a random
/// multiplex, node permutation and model.
pub fn permutation_gap(seed: u64, agg: AggregatorKind, per_layer_intra: bool) -> f64 {
    use rand::seq::SliceRandom;
    let mut r = rng(seed);
    let n = r.gen_range(3..=7);
    let l = r.gen_range(1..=3);
    let f = r.gen_range(1..=4);
    let net = random_multiplex(n, l, 0.5, true, &mut r);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut r);
    let moved = net.relabeled(&perm).unwrap();
    let mut store = ParamStore::new();
    let mut cfg = model_cfg(f, agg, 2, l);
    cfg.per_layer_intra = per_layer_intra;
    let model = Mgnn::new(&mut store, "m", cfg, &mut r).unwrap();
    let x = rand_tensor(n * l, f, &mut r);
    let mut xp = Tensor::zeros(n * l, f);
    for flat in 0..n * l {
        let rep = Replica::from_flat(flat, n);
        let to = Replica::new(perm[rep.node], rep.layer).flat(n);
        xp.data_mut()[to * f..(to + 1) * f].copy_from_slice(x.row(flat));
    }
    let a = forward(&model, &store, &SupraGraph::new(&net), &x);
    let b = forward(&model, &store, &SupraGraph::new(&moved), &xp);
    let mut gap: f64 = 0.0;
    for flat in 0..n * l {
        let rep = Replica::from_flat(flat, n);
        let to = Replica::new(perm[rep.node], rep.layer).flat(n);
        for (u, v) in a.row(flat).iter().zip(b.row(to)) {
            gap = gap.max((u - v).abs());
        }
    }
    gap
}

/// With one layer and concat+linear weights that keep only the intra half,
/// the model must equal a plain GAT stack (ELU between layers) on that layer.
pub fn monoplex_gap(seed: u64) -> f64 {
    let mut r = rng(seed);
    let n = r.gen_range(3..=8);
    let f = r.gen_range(1..=4);
    let k = r.gen_range(1..=3);
    let g = random_layer(n, 0.5, r.gen_bool(0.5), &mut r);
    let net = MultilayerNetwork::new(n, vec![g.clone()]).unwrap();
    let mut store = ParamStore::new();
    let model = Mgnn::new(&mut store, "m", model_cfg(f, AggregatorKind::ConcatLinear, k, 1), &mut r).unwrap();
    let d = model.out_dim();
    for layer in model.layers() {
        let Aggregator::ConcatLinear(lin) = &layer.agg else { unreachable!() };
        let mut w = Tensor::zeros(2 * d, d);
        for i in 0..d {
            w.data_mut()[i * d + i] = 1.0;
        }
        store.set_value(lin.weight(), w).unwrap();
        store.set_value(lin.bias(), Tensor::zeros(1, d)).unwrap();
    }
    let x = rand_tensor(n, f, &mut r);
    let got = forward(&model, &store, &SupraGraph::new(&net), &x);

    let edges = EdgeIndex::build(n, &[&g], 0..n);
    let mut tape = Tape::new();
    let mut h = tape.constant(x);
    for (i, layer) in model.layers().iter().enumerate() {
        let IntraGat::Shared(gat) = &layer.intra else { unreachable!() };
        if i > 0 {
            h = tape.elu(h);
        }
        h = gat.forward(&mut tape, &store, h, &edges).unwrap();
    }
    got.data().iter().zip(tape.value(h).data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// Hop distances from `target` in the supra graph, following edges in
/// message direction (`src -> dst`) backwards.
fn supra_hops(net: &MultilayerNetwork, target: usize) -> Vec<usize> {
    let a = supra_adjacency(net);
    let rows = net.n_replicas();
    let mut dist = vec![usize::MAX; rows];
    dist[target] = 0;
    let mut frontier = vec![target];
    let mut d = 0;
    while !frontier.is_empty() {
        d += 1;
        let mut next = Vec::new();
        for &v in &frontier {
            for u in 0..rows {
                // u sends to v when the entry (u, v) is an edge u -> v
                if a.get(u, v) != 0.0 && dist[u] == usize::MAX {
                    dist[u] = d;
                    next.push(u);
                }
            }
        }
        frontier = next;
    }
    dist
}

/// Perturbing every replica more than K hops away leaves the target row
/// bit-identical.
pub fn receptive_field_check(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let n = r.gen_range(4..=9);
    let l = r.gen_range(1..=3);
    let net = random_multiplex(n, l, 0.25, true, &mut r);
    let graph = SupraGraph::new(&net);
    let rows = n * l;
    let target = r.gen_range(0..rows);
    let dist = supra_hops(&net, target);
    for k in 1..=3 {
        let mut store = ParamStore::new();
        let agg = AGGREGATORS[r.gen_range(0..4)];
        let model = Mgnn::new(&mut store, "m", model_cfg(2, agg, k, l), &mut r).unwrap();
        let x = rand_tensor(rows, 2, &mut r);
        let base = forward(&model, &store, &graph, &x);
        let mut far = x.clone();
        for row in (0..rows).filter(|&row| dist[row] > k) {
            far.data_mut()[row * 2] += 3.0;
            far.data_mut()[row * 2 + 1] -= 2.0;
        }
        if forward(&model, &store, &graph, &far).row(target) != base.row(target) {
            return Err(format!("seed {seed}: K={k} output moved by features beyond {k} hops"));
        }
    }
    Ok(())
}

/// Leakage violations of a random link split on a random planted multiplex.
pub fn link_split_issues(seed: u64) -> Vec<String> {
    let mut r = rng(seed);
    let spec = PlantedSpec { n_nodes: r.gen_range(12..40), n_layers: r.gen_range(1..=3), p_a: 0.5, p_b: 0.3, p_out: 0.05, seed };
    let net = spec.generate().unwrap();
    let target = r.gen_range(0..spec.n_layers);
    let fraction = r.gen_range(0.05..0.5);
    let split = match make_link_split(&net, target, fraction, seed) {
        Ok(s) => s,
        Err(e) => return vec![format!("seed {seed}: split failed: {e}")],
    };
    let mut issues = leakage_report(&net, &split).unwrap();
    let trained = split.training_network(&net).unwrap();
    for a in (0..net.n_layers()).filter(|&a| a != target) {
        if trained.layer(a) != net.layer(a) {
            issues.push(format!("seed {seed}: layer {a} changed"));
        }
    }
    let expected = net.layer(target).n_edges() - split.test_pos.len();
    if trained.layer(target).n_edges() != expected {
        issues.push(format!("seed {seed}: target layer keeps {} edges, expected {expected}", trained.layer(target).n_edges()));
    }
    issues
}

/// Max relative finite-difference error per component on one random
/// instance (N ≤ 6, L ≤ 3, F ≤ 4).
pub fn gradient_errors(seed: u64) -> Vec<(String, f64)> {
    const H: f64 = 1e-6;
    let mut r = rng(seed);
    let n = r.gen_range(3..=6);
    let l = r.gen_range(1..=3);
    let f = r.gen_range(1..=4);
    let net = random_multiplex(n, l, 0.5, true, &mut r);
    let graph = SupraGraph::new(&net);
    let x = rand_tensor(n * l, f, &mut r);
    let mut out = Vec::new();

    let mut store = ParamStore::new();
    let gat = Gat::new(&mut store, "g", GatConfig { in_dim: f, head_dim: 2, heads: 2, negative_slope: 0.2 }, &mut r).unwrap();
    let sq_mean = |t: &mut Tape, v| {
        let s = t.mul(v, v)?;
        Ok(t.mean(s))
    };
    out.push((
        "gat/params".into(),
        param_grad_check(&store, |t, s| {
            let xv = t.constant(x.clone());
            let o = gat.forward(t, s, xv, graph.intra())?;
            sq_mean(t, o)
        }, H)
        .unwrap(),
    ));
    out.push(("gat/input".into(), grad_check(|t, xv| {
        let o = gat.forward(t, &store, xv, graph.inter())?;
        sq_mean(t, o)
    }, &x, H).unwrap()));

    for agg in AGGREGATORS {
        for per_layer in [false, true] {
            let mut store = ParamStore::new();
            let mut cfg = model_cfg(f, agg, 2, l);
            cfg.per_layer_intra = per_layer;
            let model = Mgnn::new(&mut store, "m", cfg, &mut r).unwrap();
            let name = format!("supra/{agg:?}{}", if per_layer { "/per-layer" } else { "" });
            out.push((
                name.clone(),
                param_grad_check(&store, |t, s| {
                    let xv = t.constant(x.clone());
                    let o = model.forward(t, s, &graph, xv, None)?;
                    sq_mean(t, o)
                }, H)
                .unwrap(),
            ));
            out.push((format!("{name}/input"), grad_check(|t, xv| {
                let o = model.forward(t, &store, &graph, xv, None)?;
                sq_mean(t, o)
            }, &x, H).unwrap()));
        }
    }

    let feats = input_features(&net, FeatureMode::Degree);
    let classes = r.gen_range(2..=4);
    let labels: Vec<usize> = (0..n).map(|_| r.gen_range(0..classes)).collect();
    let weights: Vec<f64> = (0..classes).map(|_| r.gen_range(0.5..2.0)).collect();
    let mut store = ParamStore::new();
    let agg = AGGREGATORS[r.gen_range(0..4)];
    let clf = NodeClassifier::new(&mut store, model_cfg(3, agg, 2, l), &[3], classes, &mut r).unwrap();
    out.push((
        "node-clf/weighted-ce".into(),
        param_grad_check(&store, |t, s| {
            let xv = t.constant(feats.clone());
            let logits = clf.forward(t, s, &graph, xv, None)?;
            t.weighted_cross_entropy(logits, &labels, &weights)
        }, H)
        .unwrap(),
    ));

    let mut store = ParamStore::new();
    let lp = LinkPredictor::new(&mut store, model_cfg(3, agg, 2, l), &[4], r.gen_range(0..l), &mut r).unwrap();
    let left: Rc<[usize]> = (0..4).map(|_| r.gen_range(0..n)).collect();
    let right: Rc<[usize]> = (0..4).map(|_| r.gen_range(0..n)).collect();
    out.push((
        "link-pred/bce".into(),
        param_grad_check(&store, |t, s| {
            let xv = t.constant(feats.clone());
            let e = lp.embed(t, s, &graph, xv, None)?;
            let p = lp.score(t, s, e, &left, &right)?;
            t.bce_loss(p, &[1.0, 0.0, 1.0, 0.0])
        }, H)
        .unwrap(),
    ));

    let other = random_multiplex(r.gen_range(2..=5), l, 0.6, false, &mut r);
    let (g2, g1) = (SupraGraph::new(&other), &graph);
    let (batch, graph_of) = SupraGraph::batch(&[g1, &g2]);
    let xb = Tensor::new(batch.n_rows(), 3, [feats.data(), input_features(&other, FeatureMode::Degree).data()].concat()).unwrap();
    let mut store = ParamStore::new();
    let gc = GraphClassifier::new(&mut store, model_cfg(3, agg, 2, l), &mut r).unwrap();
    out.push((
        "graph-clf/mse".into(),
        param_grad_check(&store, |t, s| {
            let xv = t.constant(xb.clone());
            let p = gc.forward(t, s, &batch, &graph_of, 2, xv, None)?;
            t.mse_loss(p, &[1.0, 0.0])
        }, H)
        .unwrap(),
    ));

    let mut store = ParamStore::new();
    let pool = SoftAttentionPool::new(&mut store, "p", f, 2, &mut r).unwrap();
    let ids: Rc<[usize]> = (0..n * l).map(|i| i % 2).collect();
    out.push(("pool/input".into(), grad_check(|t, xv| {
        let o = pool.forward(t, &store, xv, &ids, 2)?;
        sq_mean(t, o)
    }, &x, H).unwrap()));

    let shift = r.gen_range(-0.5..0.5);
    let target: Vec<f64> = (0..x.len()).map(|_| r.gen_range(0.0..1.0)).collect();
    out.push(("elementwise/elu+leaky+sigmoid".into(), grad_check(|t, xv| {
        let a = t.elu(xv);
        let b = t.leaky_relu(xv, 0.2);
        let c = t.mul(a, b)?;
        let c = t.scale(c, 1.0 + shift);
        let s = t.sigmoid(c);
        t.mse_loss(s, &target)
    }, &x, H).unwrap()));
    out
}
