mod common;

use common::floyd_warshall;
use idgnn_core::generators::{gen_dataset_sweep, gen_small_world, Family, GeneratorSpec};
use idgnn_core::nn::pipeline::{Target, Wiring};
use idgnn_core::nn::{init_model, Flavor, HeadKind, Model, ModelConfig, Variant};
use idgnn_core::tasks::{
    evaluate, make_graph_cc_task, make_node_cc_task, make_spd_task, split, train, TrainConfig,
    SPD_CLASSES,
};
use idgnn_core::{Error, Graph};

fn small_world_set(count: usize) -> Vec<Graph> {
    let spec = GeneratorSpec {
        family: Family::SmallWorld,
        num_nodes: 30,
        degree_param: 4,
        prob: 0.0,
        seed: 0,
    };
    gen_dataset_sweep(&spec, &[0.0, 0.1, 0.2, 0.4], count, 3).unwrap()
}

fn node_labels(t: &Target) -> &[usize] {
    match t {
        Target::Nodes(l) => l,
        _ => panic!("not a node target"),
    }
}

#[test]
fn node_cc_labels() {
    let k3 = Graph::new(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
    let star = Graph::new(4, &[(0, 1), (0, 2), (0, 3)]).unwrap();
    let paw = Graph::new(4, &[(0, 1), (1, 2), (0, 2), (0, 3)]).unwrap();
    let t = make_node_cc_task(&[k3, star, paw]).unwrap();
    assert_eq!(node_labels(&t.items[0].target), &[9, 9, 9]);
    assert_eq!(node_labels(&t.items[1].target), &[0, 0, 0, 0]);
    assert_eq!(node_labels(&t.items[2].target)[0], 3);
    assert_eq!(t.spec.bin_edges.len(), 11);
}

#[test]
fn graph_cc_labels() {
    let empty = Graph::new(5, &[]).unwrap();
    let two_k3 = Graph::new(6, &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]).unwrap();
    let lattice = gen_small_world(10, 4, 0.0, 1).unwrap();
    let t = make_graph_cc_task(&[empty, two_k3, lattice]).unwrap();
    let labels: Vec<_> = t.items.iter().map(|i| i.target.labels()[0]).collect();
    assert_eq!(labels, vec![0, 9, 9]);
}

#[test]
fn spd_labels_match_distances() {
    let p6 = Graph::new(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)]).unwrap();
    let t = make_spd_task(&[p6.clone()], 15, 1).unwrap();
    let Target::Pairs(pairs) = &t.items[0].target else {
        panic!()
    };
    let fw = floyd_warshall(&p6);
    assert!(!pairs.is_empty());
    for &(u, v, l) in pairs {
        assert_ne!(u, v);
        assert_eq!(l, fw[u][v].unwrap().min(5) - 1);
    }
    // the only distance-5 pair is the endpoints
    assert!(pairs
        .iter()
        .any(|&(u, v, l)| l == 4 && u.min(v) == 0 && u.max(v) == 5));
    assert!(pairs.iter().any(|&(_, _, l)| l == 0));
}

#[test]
fn spd_sampling_is_stratified_and_deterministic() {
    let graphs = small_world_set(32);
    let t = make_spd_task(&graphs, 20, 9).unwrap();
    let mut hist = [0usize; SPD_CLASSES];
    for it in &t.items {
        for l in it.target.labels() {
            hist[l] += 1;
        }
    }
    let (max, min) = (*hist.iter().max().unwrap(), *hist.iter().min().unwrap());
    assert!(min > 0 && max <= 3 * min, "{hist:?}");
    assert_eq!(t, make_spd_task(&graphs, 20, 9).unwrap());
    assert_ne!(t, make_spd_task(&graphs, 20, 10).unwrap());
}

#[test]
fn split_is_disjoint_and_covering() {
    let (a, b) = split(64, 0.8, 5).unwrap();
    assert_eq!((a.len(), b.len()), (51, 13));
    let mut all: Vec<_> = a.iter().chain(&b).copied().collect();
    all.sort_unstable();
    assert_eq!(all, (0..64).collect::<Vec<_>>());
    assert!(split(10, 0.0, 1).is_err());
}

fn node_model(variant: Variant, seed: u64) -> Model {
    let mut c = ModelConfig::new(Flavor::Sage, variant, 1, 10);
    c.hidden_dim = 8;
    c.seed = seed;
    init_model(c).unwrap()
}

#[test]
fn zero_epochs_reports_untrained_accuracy() {
    let task = make_node_cc_task(&small_world_set(10)).unwrap();
    let mut m = node_model(Variant::IdFast, 1);
    let before = m.clone();
    let cfg = TrainConfig {
        epochs: 0,
        seed: 4,
        ..Default::default()
    };
    let r = train(&mut m, &task, &cfg).unwrap();
    assert!(r.epoch_losses.is_empty());
    assert_eq!(m, before);
    let (_, val) = split(10, cfg.train_fraction, 4).unwrap();
    let val_items: Vec<_> = val.iter().map(|&i| &task.items[i]).collect();
    assert_eq!(r.val_accuracy, evaluate(&m, &val_items).unwrap());
}

#[test]
fn training_is_deterministic_and_lowers_loss() {
    let task = make_node_cc_task(&small_world_set(12)).unwrap();
    let cfg = TrainConfig {
        epochs: 15,
        seed: 2,
        ..Default::default()
    };
    let mut a = node_model(Variant::IdFast, 3);
    let mut b = node_model(Variant::IdFast, 3);
    let ra = train(&mut a, &task, &cfg).unwrap();
    let rb = train(&mut b, &task, &cfg).unwrap();
    assert_eq!(ra, rb);
    assert_eq!(a, b);
    assert!(ra.epoch_losses.last().unwrap() < ra.epoch_losses.first().unwrap());
    assert!(ra.wall_clock_secs.is_none());
    assert_eq!(ra.wiring, Wiring::NodeEmbedding);
}

#[test]
fn edge_wiring_depends_on_variant() {
    let task = make_spd_task(&small_world_set(5), 10, 1).unwrap();
    let cfg = TrainConfig {
        epochs: 1,
        ..Default::default()
    };
    let mut c = ModelConfig::new(Flavor::Gcn, Variant::IdFull, 1, 5);
    c.num_layers = 2;
    c.hidden_dim = 4;
    let r = train(&mut init_model(c).unwrap(), &task, &cfg).unwrap();
    assert_eq!(r.wiring, Wiring::Conditional);
    c.variant = Variant::Plain;
    assert!(matches!(
        train(&mut init_model(c).unwrap(), &task, &cfg),
        Err(Error::Input(_))
    ));
    c.head = HeadKind::PairMlp { hidden: 4 };
    let r = train(&mut init_model(c).unwrap(), &task, &cfg).unwrap();
    assert_eq!(r.wiring, Wiring::PairConcat);
}

#[test]
fn constant_logits_pick_the_lowest_class() {
    // a zero model scores every class equally; balanced labels give 1/5
    let task = make_spd_task(&small_world_set(8), 10, 1).unwrap();
    let mut c = ModelConfig::new(Flavor::Gcn, Variant::Plain, 1, 5);
    c.head = HeadKind::PairMlp { hidden: 4 };
    let m = Model::zeros(c).unwrap();
    let items: Vec<_> = task.items.iter().collect();
    assert_eq!(evaluate(&m, &items).unwrap(), 0.2);
    assert!(evaluate(&m, &[]).is_err());
}

#[test]
fn class_count_must_match() {
    let task = make_node_cc_task(&small_world_set(5)).unwrap();
    let mut c = ModelConfig::new(Flavor::Gcn, Variant::Plain, 1, 4);
    c.hidden_dim = 4;
    assert!(train(&mut init_model(c).unwrap(), &task, &TrainConfig::default()).is_err());
}
