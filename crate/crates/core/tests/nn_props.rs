mod common;

use std::collections::BTreeMap;

use common::{gnp, mixed_graph, random_matrix, random_perm, rng, FLAVORS};
use idgnn_core::analytic::{lemma1_embeddings, walk_count_features};
use idgnn_core::expressiveness::certify_gnn_blindness;
use idgnn_core::generators::gen_d_regular;
use idgnn_core::nn::{
    edge_pair_score, forward_conditional, forward_id_full, forward_layers, forward_plain,
    init_model, read_checkpoint, readout_graph, write_checkpoint, Aggregation, Flavor, HeadKind,
    Model, ModelConfig, Variant,
};
use idgnn_core::Graph;
use ndarray::{array, Array2};
use rand::Rng;

fn max_abs_diff(a: ndarray::ArrayView1<f64>, b: ndarray::ArrayView1<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn random_model(flavor: Flavor, variant: Variant, input_dim: usize, seed: u64) -> Model {
    let mut r = rng(seed);
    let mut c = ModelConfig::new(flavor, variant, input_dim, 3);
    c.num_layers = r.gen_range(1..=3);
    c.hidden_dim = r.gen_range(2..=6);
    c.aggregation = [Aggregation::Sum, Aggregation::Mean, Aggregation::Max][r.gen_range(0..3)];
    c.fast_k = 4;
    c.seed = seed;
    init_model(c).unwrap()
}

fn walk_model(k: usize) -> Model {
    let mut c = ModelConfig::new(Flavor::Sage, Variant::IdFull, 1, 1);
    c.num_layers = k;
    c.hidden_dim = k;
    c.aggregation = Aggregation::Sum;
    let mut m = Model::zeros(c).unwrap();
    m.load_walk_counting_weights().unwrap();
    m
}

#[test]
fn tied_messages_reduce_to_plain_message_passing() {
    for seed in 0..50 {
        let flavor = FLAVORS[seed as usize % 3];
        let g = mixed_graph(seed, 25);
        let mut m = random_model(flavor, Variant::IdFull, 2, seed);
        m.tie_identity_messages();
        let x = random_matrix(g.num_nodes(), 2, seed);
        let k = m.config.num_layers;
        let full = forward_plain(&m, &g, &x).unwrap();
        for v in 0..g.num_nodes() {
            let ego = g.extract_ego(v, k, None).unwrap();
            let xl = x.select(ndarray::Axis(0), &ego.to_parent);
            let center = forward_id_full(&m, &ego, &xl).unwrap();
            let plain_ego = forward_plain(&m, &ego.subgraph, &xl).unwrap();
            assert!(max_abs_diff(center.view(), plain_ego.row(ego.center)) <= 1e-12);
            if flavor != Flavor::Gcn {
                // gcn normalizes by ego degrees, which differ at the boundary
                assert!(max_abs_diff(center.view(), full.row(v)) <= 1e-12);
            }
        }
    }
}

#[test]
fn plain_forward_is_permutation_equivariant() {
    for seed in 0..30 {
        for flavor in FLAVORS {
            for variant in [Variant::Plain, Variant::IdFast] {
                let g = mixed_graph(seed, 25);
                let m = random_model(flavor, variant, 2, seed);
                let x = random_matrix(g.num_nodes(), 2, seed);
                let p = random_perm(g.num_nodes(), seed + 7);
                let mut xp = Array2::zeros(x.raw_dim());
                for v in 0..g.num_nodes() {
                    xp.row_mut(p[v]).assign(&x.row(v));
                }
                let h = forward_plain(&m, &g, &x).unwrap();
                let hp = forward_plain(&m, &g.permute(&p).unwrap(), &xp).unwrap();
                for v in 0..g.num_nodes() {
                    assert!(max_abs_diff(h.row(v), hp.row(p[v])) <= 1e-9);
                }
            }
        }
    }
}

#[test]
fn walk_counting_weights_reproduce_integer_counts() {
    for seed in 0..20 {
        let g = mixed_graph(seed, 20);
        for k in 1..=5 {
            let m = walk_model(k);
            let feats = walk_count_features(&g, k).unwrap();
            for v in 0..g.num_nodes() {
                let ego = g.extract_ego(v, k, None).unwrap();
                let ones = Array2::ones((ego.subgraph.num_nodes(), 1));
                let (h, _) = forward_layers(&m, &ego.subgraph, ones, ego.identity).unwrap();
                let counts = lemma1_embeddings(&ego, k).unwrap();
                for u in 0..ego.subgraph.num_nodes() {
                    for j in 0..k {
                        assert_eq!(h[[u, j]], counts.counts[u][j] as f64);
                    }
                }
                for j in 0..k {
                    assert_eq!(h[[ego.center, j]], feats[v][j] as f64);
                }
            }
        }
    }
}

#[test]
fn triangle_center_embedding_with_walk_weights() {
    let k3 = Graph::new(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
    let ego = k3.extract_ego(0, 3, None).unwrap();
    let h = forward_id_full(&walk_model(3), &ego, &Array2::ones((3, 1))).unwrap();
    assert_eq!(h.to_vec(), vec![0.0, 2.0, 2.0]);
}

#[test]
fn conditional_embeddings() {
    let c8 = Graph::new(8, &(0..8).map(|i| (i, (i + 1) % 8)).collect::<Vec<_>>()).unwrap();
    let x = Array2::ones((8, 1));
    let m = walk_model(3);
    // v = u is the ordinary embedding
    let own = forward_id_full(
        &m,
        &c8.extract_ego(0, 3, None).unwrap(),
        &Array2::ones((7, 1)),
    )
    .unwrap();
    assert_eq!(forward_conditional(&m, &c8, &x, 0, 0).unwrap(), own);
    // distances 1, 2, 3 give different count vectors
    let by_dist: Vec<Vec<f64>> = (1..=3)
        .map(|v| forward_conditional(&m, &c8, &x, 0, v).unwrap().to_vec())
        .collect();
    assert_eq!(by_dist[0], vec![1.0, 0.0, 3.0]);
    assert_eq!(by_dist[1], vec![0.0, 1.0, 0.0]);
    assert_eq!(by_dist[2], vec![0.0, 0.0, 1.0]);
    // outside the ball: plain pass on u's ego
    let r = random_model(Flavor::Sage, Variant::IdFull, 1, 4);
    let k = r.config.num_layers;
    let ego = c8.extract_ego(0, k, None).unwrap();
    let plain = forward_plain(
        &r,
        &ego.subgraph,
        &Array2::ones((ego.subgraph.num_nodes(), 1)),
    )
    .unwrap();
    let cond = forward_conditional(&r, &c8, &x, 0, 4).unwrap();
    assert!(k < 4);
    assert!(max_abs_diff(cond.view(), plain.row(ego.center)) == 0.0);
}

#[test]
fn zero_model_gives_zero_embeddings() {
    for flavor in FLAVORS {
        let m = Model::zeros(ModelConfig::new(flavor, Variant::Plain, 2, 3)).unwrap();
        let g = gnp(10, 0.3, 1);
        let h = forward_plain(&m, &g, &random_matrix(10, 2, 1)).unwrap();
        assert!(h.iter().all(|&v| v == 0.0));
    }
}

/// One gin layer with identity message weights, eps = -1 and identity update
/// on P3 with one-hot features: every node outputs the sum of its neighbors'
/// features.
#[test]
fn one_layer_sum_on_path_by_hand() {
    let p3 = Graph::new(3, &[(0, 1), (1, 2)]).unwrap();
    let mut c = ModelConfig::new(Flavor::Gin, Variant::Plain, 3, 1);
    c.num_layers = 1;
    c.hidden_dim = 3;
    let mut m = Model::zeros(c).unwrap();
    let l = m.layers[0];
    for i in 0..3 {
        m.params.view_mut(l.msg0.weight)[[i, i]] = 1.0;
        m.params.view_mut(l.update_weight.unwrap())[[i, i]] = 1.0;
    }
    m.params.view_mut(l.eps.unwrap())[[0, 0]] = -1.0;
    let h = forward_plain(&m, &p3, &Array2::eye(3)).unwrap();
    assert_eq!(h, array![[0.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 0.0]]);
}

#[test]
fn edge_features_enter_messages() {
    // single edge, message along it is x_s * 1 + f * 2
    let g = Graph::new(2, &[(0, 1)])
        .unwrap()
        .with_edge_features(&BTreeMap::from([((0, 1), vec![0.5])]))
        .unwrap();
    let mut c = ModelConfig::new(Flavor::Gin, Variant::Plain, 1, 1);
    c.num_layers = 1;
    c.hidden_dim = 1;
    c.edge_dim = 1;
    let mut m = Model::zeros(c).unwrap();
    let l = m.layers[0];
    m.params.view_mut(l.msg0.weight)[[0, 0]] = 1.0;
    m.params.view_mut(l.msg0.edge_weight.unwrap())[[0, 0]] = 2.0;
    m.params.view_mut(l.update_weight.unwrap())[[0, 0]] = 1.0;
    m.params.view_mut(l.eps.unwrap())[[0, 0]] = -1.0;
    let h = forward_plain(&m, &g, &array![[1.0], [3.0]]).unwrap();
    assert_eq!(h, array![[4.0], [2.0]]);
    // a model expecting edge features rejects graphs without them
    assert!(forward_plain(
        &m,
        &Graph::new(2, &[(0, 1)]).unwrap(),
        &array![[1.0], [3.0]]
    )
    .is_err());
}

#[test]
fn pair_scores() {
    let mut c = ModelConfig::new(Flavor::Gcn, Variant::Plain, 1, 3);
    c.hidden_dim = 3;
    c.head = HeadKind::PairMlp { hidden: 3 };
    let mut m = Model::zeros(c).unwrap();
    let hd = m.head;
    m.params
        .view_mut(hd.b2.unwrap())
        .assign(&array![[0.1, 0.2, 0.3]]);
    let z = ndarray::Array1::zeros(3);
    assert_eq!(
        edge_pair_score(&m, z.view(), z.view()).unwrap().to_vec(),
        vec![0.1, 0.2, 0.3]
    );
    // first layer selects h_u, second is the identity
    m.params.view_mut(hd.b2.unwrap()).fill(0.0);
    for i in 0..3 {
        m.params.view_mut(hd.w1)[[i, i]] = 1.0;
        m.params.view_mut(hd.w2.unwrap())[[i, i]] = 1.0;
    }
    let (hu, hv) = (array![0.5, 1.5, 2.0], array![3.0, 0.0, 1.0]);
    assert_eq!(edge_pair_score(&m, hu.view(), hv.view()).unwrap(), hu);
    assert_eq!(edge_pair_score(&m, hv.view(), hu.view()).unwrap(), hv);
    assert!(edge_pair_score(&m, hu.view(), array![1.0].view()).is_err());
}

#[test]
fn readout_sums_rows() {
    assert_eq!(
        readout_graph(&array![[1.0, 2.0]]).unwrap(),
        array![1.0, 2.0]
    );
    assert_eq!(
        readout_graph(&array![[1.0, 2.0], [1.0, 2.0]]).unwrap(),
        array![2.0, 4.0]
    );
    assert_eq!(
        readout_graph(&array![[1.0, 2.0], [3.0, -1.0]]).unwrap(),
        readout_graph(&array![[3.0, -1.0], [1.0, 2.0]]).unwrap()
    );
    assert!(readout_graph(&Array2::zeros((0, 2))).is_err());
}

#[test]
fn plain_models_are_blind_on_regular_graphs() {
    for seed in 0..5 {
        let g = gen_d_regular(24, 4, seed).unwrap();
        for flavor in FLAVORS {
            let m = random_model(flavor, Variant::Plain, 1, seed);
            assert!(certify_gnn_blindness(&g, &m).unwrap());
        }
    }
}

#[test]
fn identity_models_see_through_regular_graphs() {
    let g = (0..).map(|s| gen_d_regular(16, 4, s).unwrap()).find(|g| {
        let f = walk_count_features(g, 3).unwrap();
        f.iter().any(|r| r != &f[0])
    });
    let g = g.unwrap();
    // single random draws can lose the signal in dead ReLUs; most do not
    for flavor in FLAVORS {
        let seen = (0..8)
            .filter(|&seed| {
                let mut c = ModelConfig::new(flavor, Variant::IdFull, 1, 2);
                c.num_layers = 3;
                c.hidden_dim = 8;
                c.aggregation = Aggregation::Sum;
                c.seed = seed;
                !certify_gnn_blindness(&g, &init_model(c).unwrap()).unwrap()
            })
            .count();
        assert!(seen >= 5, "{flavor:?}: {seen}/8");
    }
}

#[test]
fn checkpoint_round_trip_reproduces_outputs() {
    let dir = std::env::temp_dir().join(format!("idgnn-ckpt-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    for flavor in FLAVORS {
        let m = random_model(flavor, Variant::IdFast, 1, 3);
        let path = dir.join("m.bin");
        write_checkpoint(&m, std::fs::File::create(&path).unwrap()).unwrap();
        let back = read_checkpoint(std::fs::File::open(&path).unwrap()).unwrap();
        let g = gnp(12, 0.3, 2);
        let x = Array2::ones((12, 1));
        assert_eq!(
            forward_plain(&m, &g, &x).unwrap(),
            forward_plain(&back, &g, &x).unwrap()
        );
    }
    std::fs::remove_dir_all(&dir).unwrap();
}
