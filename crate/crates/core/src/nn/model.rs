use crate::autodiff::{softmax_rows, Matrix, Reduce, Tape, Var};
use crate::encodings::{encode_graph, encode_pairs, EncodedFeatures, GraphEncoding};
use crate::error::{Error, Result};
use crate::graph::{pair_from_index_unchecked, SparseGraph};
use crate::query::{build_message_graph, MessageGraph};

use super::{Mode, NetworkConfig, NetworkWeights};

/// Everything one forward pass needs for one graph.
#[derive(Debug, Clone)]
pub struct DenoiserInput {
    pub mg: MessageGraph,
    /// pair rows aligned with `mg.edges`
    pub enc: EncodedFeatures,
    /// condensed indices of the pairs to predict
    pub queries: Vec<usize>,
    /// `t / T`
    pub t_norm: f64,
}

/// Builds the message graph and encodings for `noisy` and `queries`.
///
/// In link-prediction mode the message graph holds the noisy edges only.
pub fn prepare_input(
    noisy: &SparseGraph,
    queries: &[usize],
    t_norm: f64,
    cfg: &NetworkConfig,
) -> Result<DenoiserInput> {
    let genc = encode_graph(noisy, cfg.a, cfg.b, &cfg.encoding)?;
    prepare_input_cached(noisy, &noisy.adjacency(), &genc, queries, t_norm, cfg)
}

/// As [`prepare_input`], reusing graph-level encodings computed once for
/// `noisy`.
pub fn prepare_input_cached(
    noisy: &SparseGraph,
    adjacency: &[Vec<usize>],
    genc: &GraphEncoding,
    queries: &[usize],
    t_norm: f64,
    cfg: &NetworkConfig,
) -> Result<DenoiserInput> {
    let mg = match cfg.mode {
        Mode::Transformer => build_message_graph(noisy, queries)?,
        Mode::LinkPred => {
            let pairs = crate::graph::num_pairs(noisy.n());
            if queries.iter().any(|&q| q >= pairs) {
                return Err(Error::arg("query pair index out of range"));
            }
            build_message_graph(noisy, &[])?
        }
    };
    let enc = EncodedFeatures {
        node_dim: genc.node_dim,
        pair_dim: cfg.encoding.pair_dim(),
        node: genc.node.clone(),
        pair: encode_pairs(noisy, adjacency, &mg.pair_indices, &cfg.encoding),
        graph: genc.graph.clone(),
    };
    Ok(DenoiserInput {
        mg,
        enc,
        queries: queries.to_vec(),
        t_norm,
    })
}

/// Predicted clean distributions for every node and every query pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// `n x a`
    pub node: Matrix,
    /// `queries.len() x b`, aligned with `queries`
    pub edge: Matrix,
    pub queries: Vec<usize>,
}

struct Logits {
    node: Var,
    edge: Var,
    params: Vec<Var>,
}

fn one_hot(labels: &[usize], classes: usize) -> Matrix {
    let mut m = Matrix::zeros(labels.len(), classes);
    for (r, &y) in labels.iter().enumerate() {
        m.data[r * classes + y] = 1.0;
    }
    m
}

struct Net<'a> {
    w: &'a NetworkWeights,
    params: Vec<Var>,
}

impl Net<'_> {
    fn p(&self, name: &str) -> Var {
        self.params[self
            .w
            .position(name)
            .unwrap_or_else(|| panic!("missing tensor {name}"))]
    }

    fn linear(&self, tape: &mut Tape, x: Var, w: &str, b: &str) -> Var {
        let h = tape.matmul(x, self.p(w));
        tape.add_row(h, self.p(b))
    }

    /// `M1 W1 + (M1 W2) ⊙ M2 + M2`
    fn film(&self, tape: &mut Tape, m1: Var, m2: Var, prefix: &str) -> Var {
        let lin = tape.matmul(m1, self.p(&format!("{prefix}.w1")));
        let gate = tape.matmul(m1, self.p(&format!("{prefix}.w2")));
        let mixed = tape.mul(gate, m2);
        let s = tape.add(lin, mixed);
        tape.add(s, m2)
    }

    fn ff(&self, tape: &mut Tape, x: Var, prefix: &str) -> Var {
        let h = self.linear(tape, x, &format!("{prefix}.w1"), &format!("{prefix}.b1"));
        let h = tape.relu(h);
        self.linear(tape, h, &format!("{prefix}.w2"), &format!("{prefix}.b2"))
    }

    /// `cat(max, min, mean, std) W`
    fn pna(&self, tape: &mut Tape, x: Var, w: &str) -> Var {
        let parts: Vec<Var> = [Reduce::Max, Reduce::Min, Reduce::Mean, Reduce::Std]
            .iter()
            .map(|&r| tape.pool(x, r))
            .collect();
        let cat = tape.concat_cols(&parts);
        tape.matmul(cat, self.p(w))
    }
}

fn check_finite(tape: &Tape, vars: &[Var], layer: usize) -> Result<()> {
    if vars.iter().all(|&v| tape.value(v).all_finite()) {
        Ok(())
    } else {
        Err(Error::numerical(format!(
            "non-finite activation in layer {layer}"
        )))
    }
}

fn build(
    tape: &mut Tape,
    w: &NetworkWeights,
    cfg: &NetworkConfig,
    input: &DenoiserInput,
) -> Result<Logits> {
    let mg = &input.mg;
    let n = mg.n;
    let ne = mg.num_edges();
    if input.enc.node.len() != n * cfg.encoding.node_dim()
        || input.enc.pair.len() != ne * cfg.encoding.pair_dim()
    {
        return Err(Error::arg("encodings do not match the message graph"));
    }
    let params: Vec<Var> = w.tensors().iter().map(|m| tape.leaf(m.clone())).collect();
    let net = Net { w, params };
    let (dx, heads) = (cfg.dx, cfg.heads);

    let x_in = {
        let oh = tape.leaf(one_hot(&mg.node_labels, cfg.a));
        let enc = tape.leaf(Matrix::from_vec(
            n,
            cfg.encoding.node_dim(),
            input.enc.node.clone(),
        ));
        tape.concat_cols(&[oh, enc])
    };
    let y_in = {
        let oh = tape.leaf(one_hot(&mg.labels, cfg.b));
        let enc = tape.leaf(Matrix::from_vec(
            ne,
            cfg.encoding.pair_dim(),
            input.enc.pair.clone(),
        ));
        tape.concat_cols(&[oh, enc])
    };
    let g_in = {
        let mut row = input.enc.graph.clone();
        row[0] = input.t_norm;
        tape.leaf(Matrix::from_vec(1, row.len(), row))
    };
    let mut x = net.linear(tape, x_in, "in.node.w", "in.node.b");
    let mut y = net.linear(tape, y_in, "in.edge.w", "in.edge.b");
    let mut g = net.linear(tape, g_in, "in.graph.w", "in.graph.b");

    let first: Vec<usize> = mg.edges.iter().map(|e| e.0).collect();
    let second: Vec<usize> = mg.edges.iter().map(|e| e.1).collect();
    let tgt: Vec<usize> = first.iter().chain(&second).copied().collect();
    let src: Vec<usize> = second.iter().chain(&first).copied().collect();
    let eidx: Vec<usize> = (0..ne).chain(0..ne).collect();
    let scale = 1.0 / ((dx / heads) as f64).sqrt();

    for l in 0..cfg.layers {
        let p = |s: &str| format!("layer{l}.{s}");

        // attention over incoming message edges
        let q = tape.matmul(x, net.p(&p("attn.wq")));
        let k = tape.matmul(x, net.p(&p("attn.wk")));
        let v = tape.matmul(x, net.p(&p("attn.wv")));
        let e1 = tape.matmul(y, net.p(&p("attn.we")));
        let e2 = tape.matmul(y, net.p(&p("attn.we2")));
        let q_t = tape.gather(q, tgt.clone());
        let k_s = tape.gather(k, src.clone());
        let e1_d = tape.gather(e1, eidx.clone());
        let key = tape.add(k_s, e1_d);
        let score = tape.head_dot(q_t, key, heads);
        let score = tape.scale(score, scale);
        let attn = tape.segment_softmax(score, tgt.clone(), n);
        let v_s = tape.gather(v, src.clone());
        let e2_d = tape.gather(e2, eidx.clone());
        let val = tape.add(v_s, e2_d);
        let weighted = tape.head_scale(attn, val);
        let msg = tape.scatter_add(weighted, tgt.clone(), n);

        // node update
        let g_nodes = tape.broadcast(g, n);
        let f = net.film(tape, msg, g_nodes, &p("film_x"));
        let upd = net.ff(tape, f, &p("ff_x"));
        let res = tape.add(x, upd);
        x = tape.layer_norm(res, net.p(&p("ln_x.gamma")), net.p(&p("ln_x.beta")));

        // edge update, averaged over both orientations
        let xi = tape.gather(x, first.clone());
        let xj = tape.gather(x, second.clone());
        let yv = tape.matmul(y, net.p(&p("edge.v")));
        let g_edges = tape.broadcast(g, ne);
        let mut dirs = Vec::with_capacity(2);
        for (a, b) in [(xi, xj), (xj, xi)] {
            let ua = tape.matmul(a, net.p(&p("edge.u")));
            let ub = tape.matmul(b, net.p(&p("edge.u2")));
            let z = tape.add(ua, ub);
            let z = tape.add(z, yv);
            let f = net.film(tape, z, g_edges, &p("film_e"));
            dirs.push(net.ff(tape, f, &p("ff_e")));
        }
        let both = tape.add(dirs[0], dirs[1]);
        let upd = tape.scale(both, 0.5);
        let res = tape.add(y, upd);
        y = tape.layer_norm(res, net.p(&p("ln_e.gamma")), net.p(&p("ln_e.beta")));

        // graph update from pooled nodes and edges
        let px = net.pna(tape, x, &p("pna_x.w"));
        let pe = net.pna(tape, y, &p("pna_e.w"));
        let pooled = tape.add(px, pe);
        let upd = net.ff(tape, pooled, &p("ff_g"));
        g = tape.add(g, upd);

        check_finite(tape, &[x, y, g], l)?;
    }

    let node = net.linear(tape, x, "out.node.w", "out.node.b");
    let edge = match cfg.mode {
        Mode::Transformer => {
            let rows = mg.query_rows.clone();
            if rows.len() != input.queries.len() {
                return Err(Error::arg("message graph does not carry the query pairs"));
            }
            let yq = tape.gather(y, rows);
            net.linear(tape, yq, "out.edge.w", "out.edge.b")
        }
        Mode::LinkPred => {
            let (qi, qj): (Vec<usize>, Vec<usize>) = input
                .queries
                .iter()
                .map(|&idx| pair_from_index_unchecked(idx, n))
                .unzip();
            let xi = tape.gather(x, qi);
            let xj = tape.gather(x, qj);
            let ij = tape.concat_cols(&[xi, xj]);
            let ji = tape.concat_cols(&[xj, xi]);
            let mut outs = Vec::with_capacity(2);
            for cat in [ij, ji] {
                let h = net.linear(tape, cat, "lp.w1", "lp.b1");
                let h = tape.relu(h);
                outs.push(net.linear(tape, h, "lp.w2", "lp.b2"));
            }
            tape.add(outs[0], outs[1])
        }
    };
    check_finite(tape, &[node, edge], cfg.layers)?;
    Ok(Logits {
        node,
        edge,
        params: net.params,
    })
}

fn check_mode(cfg: &NetworkConfig, want: Mode) -> Result<()> {
    if cfg.mode != want {
        return Err(Error::arg(format!(
            "network is configured for {:?}, not {want:?}",
            cfg.mode
        )));
    }
    Ok(())
}

fn predict(w: &NetworkWeights, cfg: &NetworkConfig, input: &DenoiserInput) -> Result<Prediction> {
    let mut tape = Tape::new();
    let logits = build(&mut tape, w, cfg, input)?;
    Ok(Prediction {
        node: softmax_rows(tape.value(logits.node)),
        edge: softmax_rows(tape.value(logits.edge)),
        queries: input.queries.clone(),
    })
}

/// Transformer-mode prediction.
pub fn forward(
    w: &NetworkWeights,
    cfg: &NetworkConfig,
    input: &DenoiserInput,
) -> Result<Prediction> {
    check_mode(cfg, Mode::Transformer)?;
    predict(w, cfg, input)
}

/// Link-prediction baseline: messages over noisy edges only.
pub fn forward_link_pred(
    w: &NetworkWeights,
    cfg: &NetworkConfig,
    input: &DenoiserInput,
) -> Result<Prediction> {
    check_mode(cfg, Mode::LinkPred)?;
    predict(w, cfg, input)
}

fn attach_loss(
    tape: &mut Tape,
    logits: &Logits,
    cfg: &NetworkConfig,
    input: &DenoiserInput,
    clean: &SparseGraph,
) -> Result<(Var, Var, Var)> {
    if clean.n() != input.mg.n {
        return Err(Error::arg(
            "clean graph and input disagree on the node count",
        ));
    }
    let node_targets = clean.node_labels().to_vec();
    let edge_targets: Vec<usize> = input
        .queries
        .iter()
        .map(|&idx| {
            let (i, j) = pair_from_index_unchecked(idx, clean.n());
            clean.edge_label(i, j)
        })
        .collect();
    let edge_scale = super::loss::edge_scale(clean.n(), edge_targets.len(), cfg.edge_weight);
    let node_ce = tape.cross_entropy(logits.node, node_targets, 1.0);
    let edge_ce = tape.cross_entropy(logits.edge, edge_targets, edge_scale);
    let total = tape.add(node_ce, edge_ce);
    Ok((total, node_ce, edge_ce))
}

/// Loss of one graph and its gradient for every tensor (zeros where unused).
pub fn loss_and_gradients(
    w: &NetworkWeights,
    cfg: &NetworkConfig,
    input: &DenoiserInput,
    clean: &SparseGraph,
) -> Result<(super::LossBreakdown, Vec<Matrix>)> {
    let mut tape = Tape::new();
    let logits = build(&mut tape, w, cfg, input)?;
    let (total, node_ce, edge_ce) = attach_loss(&mut tape, &logits, cfg, input, clean)?;
    let breakdown = super::LossBreakdown {
        total: tape.value(total).data[0],
        node: tape.value(node_ce).data[0],
        edge: tape.value(edge_ce).data[0],
        clamped: 0,
    };
    let grads = tape.backward(total);
    let out: Vec<Matrix> = logits
        .params
        .iter()
        .zip(w.tensors())
        .map(|(&v, m)| {
            grads
                .get(v)
                .cloned()
                .unwrap_or_else(|| Matrix::zeros(m.rows, m.cols))
        })
        .collect();
    if !out.iter().all(Matrix::all_finite) {
        return Err(Error::numerical("non-finite gradient"));
    }
    Ok((breakdown, out))
}

/// Loss of one graph without the backward pass.
pub fn loss_value(
    w: &NetworkWeights,
    cfg: &NetworkConfig,
    input: &DenoiserInput,
    clean: &SparseGraph,
) -> Result<super::LossBreakdown> {
    let mut tape = Tape::new();
    let logits = build(&mut tape, w, cfg, input)?;
    let (total, node_ce, edge_ce) = attach_loss(&mut tape, &logits, cfg, input, clean)?;
    Ok(super::LossBreakdown {
        total: tape.value(total).data[0],
        node: tape.value(node_ce).data[0],
        edge: tape.value(edge_ce).data[0],
        clamped: 0,
    })
}

/// Mean loss over several graphs and the matching mean gradient, reduced in
/// input order.
pub fn gradients(
    w: &NetworkWeights,
    cfg: &NetworkConfig,
    inputs: &[DenoiserInput],
    targets: &[SparseGraph],
) -> Result<(super::LossBreakdown, Vec<Matrix>)> {
    if inputs.len() != targets.len() || inputs.is_empty() {
        return Err(Error::arg(
            "need one clean target per input and at least one input",
        ));
    }
    let per: Vec<Result<(super::LossBreakdown, Vec<Matrix>)>> =
        crate::par::map_indexed(inputs.len(), |k| {
            loss_and_gradients(w, cfg, &inputs[k], &targets[k])
        });
    let scale = 1.0 / inputs.len() as f64;
    let mut total = super::LossBreakdown::default();
    let mut acc: Vec<Matrix> = w
        .tensors()
        .iter()
        .map(|m| Matrix::zeros(m.rows, m.cols))
        .collect();
    for r in per {
        let (l, g) = r?;
        total.total += l.total * scale;
        total.node += l.node * scale;
        total.edge += l.edge * scale;
        for (a, gi) in acc.iter_mut().zip(&g) {
            for (x, y) in a.data.iter_mut().zip(&gi.data) {
                *x += y * scale;
            }
        }
    }
    Ok((total, acc))
}
