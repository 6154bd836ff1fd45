use goram_core::partition::*;
use goram_core::Error;
use goram_mpc::{PartyId, Session};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn edges(pairs: &[(u64, u64)]) -> Vec<EdgeRecord> {
    pairs.iter().map(|&(s, d)| EdgeRecord::new(s, d, vec![0])).collect()
}

fn random_edges(rng: &mut ChaCha8Rng, n: usize, v: u64, attrs: usize) -> Vec<EdgeRecord> {
    (0..n)
        .map(|_| {
            EdgeRecord::new(
                rng.gen_range(1..=v),
                rng.gen_range(1..=v),
                (0..attrs).map(|_| rng.gen_range(0..1000)).collect(),
            )
        })
        .collect()
}

#[test]
fn chunks() {
    assert_eq!(chunk_of(1, 2, 8).unwrap(), 1);
    assert_eq!(chunk_of(2, 2, 8).unwrap(), 1);
    assert_eq!(chunk_of(7, 2, 8).unwrap(), 4);
    assert!(matches!(chunk_of(0, 2, 8), Err(Error::VertexOutOfRange { .. })));
    assert!(chunk_of(9, 2, 8).is_err());
}

#[test]
fn four_edge_example() {
    let cfg = GlobalConfig::new(8, 2, DEFAULT_THRESHOLD, 1).unwrap();
    let p = local_process(&edges(&[(1, 2), (1, 3), (2, 5), (7, 8)]), &cfg, 0).unwrap();
    assert_eq!(p.l, 1);
    assert_eq!(p.blocks.len(), 16);
    assert_eq!(p.block(1, 1), &edges(&[(1, 2)])[..]);
    assert_eq!(p.block(1, 2), &edges(&[(1, 3)])[..]);
    assert_eq!(p.block(1, 3), &edges(&[(2, 5)])[..]);
    assert_eq!(p.block(4, 4), &edges(&[(7, 8)])[..]);
    let dummies = p.blocks.iter().filter(|b| b[0].is_dummy()).count();
    assert_eq!(dummies, 12);
}

#[test]
fn empty_and_sorted_blocks() {
    let cfg = GlobalConfig::new(8, 2, DEFAULT_THRESHOLD, 1).unwrap();
    let p = local_process(&[], &cfg, 1).unwrap();
    assert_eq!(p.l, 1);
    assert!(p.blocks.iter().all(|b| b.len() == 1 && b[0].is_dummy()));
    let p = local_process(&[], &cfg, 0).unwrap();
    assert_eq!(p.l, 1);

    let p = local_process(&edges(&[(2, 1), (1, 2), (1, 1)]), &cfg, 2).unwrap();
    assert_eq!(p.l, 5);
    let b = p.block(1, 1);
    assert!(b[..2].iter().all(EdgeRecord::is_dummy));
    assert_eq!(&b[2..], &edges(&[(1, 1), (1, 2), (2, 1)])[..]);
}

#[test]
fn out_of_range_vertices_rejected() {
    let cfg = GlobalConfig::new(8, 2, DEFAULT_THRESHOLD, 1).unwrap();
    assert!(local_process(&edges(&[(9, 1)]), &cfg, 0).is_err());
    assert!(GlobalConfig::new(8, 9, DEFAULT_THRESHOLD, 1).is_err());
    assert!(GlobalConfig::new(0, 1, DEFAULT_THRESHOLD, 1).is_err());
}

#[test]
fn edge_list_parsing() {
    let text = "# header\n1,2,100\n3 , 4\n\n5,6,7 # trailing\n";
    let e = parse_edge_list(text.as_bytes(), 1).unwrap();
    assert_eq!(
        e,
        vec![
            EdgeRecord::new(1, 2, vec![100]),
            EdgeRecord::new(3, 4, vec![0]),
            EdgeRecord::new(5, 6, vec![7])
        ]
    );
    assert!(matches!(parse_edge_list("0,1\n".as_bytes(), 1), Err(Error::Parse { line: 1, .. })));
    assert!(parse_edge_list("1\n".as_bytes(), 1).is_err());
    assert!(parse_edge_list("1,2,3,4\n".as_bytes(), 1).is_err());
    assert!(parse_edge_list("1,x\n".as_bytes(), 1).is_err());
}

proptest! {
    #[test]
    fn partition_is_total_sorted_and_aligned(
        v in 1u64..40,
        k_raw in 1u64..40,
        pad in 0usize..3,
        raw in prop::collection::vec((1u64..1000, 1u64..1000, 0u64..50), 0..60),
    ) {
        let k = k_raw.min(v);
        let cfg = GlobalConfig::new(v, k, DEFAULT_THRESHOLD, 1).unwrap();
        let input: Vec<EdgeRecord> = raw.iter().map(|&(s, d, t)| EdgeRecord::new(s % v + 1, d % v + 1, vec![t])).collect();
        let p = local_process(&input, &cfg, pad).unwrap();
        prop_assert!(p.blocks.iter().all(|b| b.len() == p.l));
        for b in &p.blocks {
            prop_assert!(b.windows(2).all(|w| w[0].key() <= w[1].key()));
        }
        for ci in 1..=cfg.b {
            for cj in 1..=cfg.b {
                for e in p.block(ci, cj).iter().filter(|e| !e.is_dummy()) {
                    prop_assert_eq!((chunk_of(e.src, k, v).unwrap(), chunk_of(e.dst, k, v).unwrap()), (ci, cj));
                }
            }
        }
        let mut got: Vec<EdgeRecord> = p.blocks.iter().flatten().filter(|e| !e.is_dummy()).cloned().collect();
        let mut want = input.clone();
        got.sort();
        want.sort();
        prop_assert_eq!(got, want);
    }
}

fn bundles_for(p: &LocalPartition, seed: u64) -> [ShareBundle; 3] {
    share_partition(p, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn serialize(b: &ShareBundle) -> Vec<u8> {
    let mut out = Vec::new();
    b.write_to(&mut out).unwrap();
    out
}

#[test]
fn bundle_roundtrip_and_reconstruction() {
    let cfg = GlobalConfig::new(16, 4, DEFAULT_THRESHOLD, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let p = local_process(&random_edges(&mut rng, 30, 16, 2), &cfg, 1).unwrap();
    let bundles = bundles_for(&p, 9);
    let parsed: Vec<ShareBundle> = bundles.iter().map(|b| ShareBundle::read_from(&serialize(b)[..]).unwrap()).collect();
    assert_eq!(parsed, bundles.to_vec());

    let assembled = assemble_bundles(&bundles, DEFAULT_THRESHOLD).unwrap();
    assert_eq!(assembled.data.reconstruct_in_simulation(), p.lanes());

    // two bundles suffice: S1 holds (x1, x2), S2 holds (x2, x3)
    let (s1, s2) = (&bundles[0].pair, &bundles[1].pair);
    let two: Vec<u64> = (0..s1.local.len()).map(|j| s1.local[j] ^ s1.next[j] ^ s2.next[j]).collect();
    assert_eq!(two, p.lanes());
}

#[test]
fn single_bundle_header_shows_only_shape() {
    let cfg = GlobalConfig::new(16, 4, DEFAULT_THRESHOLD, 1).unwrap();
    let p = local_process(&edges(&[(1, 2), (3, 4)]), &cfg, 0).unwrap();
    let bytes = serialize(&bundles_for(&p, 1)[1]);
    let h = parse_header(&bytes).unwrap();
    assert_eq!(h.party, PartyId::P2);
    assert_eq!((h.b, h.l, h.attr_lanes, h.width, h.k, h.num_vertices), (4, 2, 1, 64, 4, 16));
}

#[test]
fn corrupted_bundles_are_detected() {
    let cfg = GlobalConfig::new(16, 4, DEFAULT_THRESHOLD, 1).unwrap();
    let p = local_process(&edges(&[(1, 2), (3, 4), (9, 9)]), &cfg, 0).unwrap();
    let bundles = bundles_for(&p, 3);

    let mut flipped = serialize(&bundles[1]);
    let last = flipped.len() - 1;
    flipped[last] ^= 1;
    let mut bad = bundles.clone();
    bad[1] = ShareBundle::read_from(&flipped[..]).unwrap();
    assert!(matches!(assemble_bundles(&bad, DEFAULT_THRESHOLD), Err(Error::BundleMismatch(_))));

    let mut truncated = serialize(&bundles[0]);
    truncated.pop();
    assert!(matches!(ShareBundle::read_from(&truncated[..]), Err(Error::Format(_))));

    let mut magic = serialize(&bundles[0]);
    magic[0] = b'X';
    assert!(ShareBundle::read_from(&magic[..]).is_err());

    let other = bundles_for(&local_process(&[], &GlobalConfig::new(16, 8, DEFAULT_THRESHOLD, 1).unwrap(), 0).unwrap(), 3);
    let mut mixed = bundles.clone();
    mixed[2] = other[2].clone();
    assert!(matches!(assemble_bundles(&mixed, DEFAULT_THRESHOLD), Err(Error::BundleMismatch(_))));

    let mut swapped = bundles.clone();
    swapped.swap(0, 1);
    assert!(assemble_bundles(&swapped, DEFAULT_THRESHOLD).is_err());
}

fn plain_k(threshold: u64, v: u64, total: u64) -> u64 {
    if total == 0 {
        return v;
    }
    (threshold * v / total).clamp(1, v)
}

#[test]
fn secure_k_examples() {
    let mut s = Session::setup(b"config-k");
    let counts = s.client_share_arith(&[30000, 35536], 64).unwrap();
    assert_eq!(secure_config_k(&mut s, &counts, 1024, 4096).unwrap(), 64);
    let counts = s.client_share_arith(&[5000, 5000], 64).unwrap();
    assert_eq!(secure_config_k(&mut s, &counts, 2, 1000).unwrap(), 1);
    let counts = s.client_share_arith(&[0, 0, 0], 64).unwrap();
    assert_eq!(secure_config_k(&mut s, &counts, 1024, 77).unwrap(), 77);
}

#[test]
fn secure_k_matches_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut s = Session::setup(b"config-k-random");
    for _ in 0..100 {
        let threshold = rng.gen_range(1..4096);
        let v = rng.gen_range(1..100_000);
        let n = rng.gen_range(1..5);
        let counts: Vec<u64> = (0..n).map(|_| rng.gen_range(0..200_000)).collect();
        let shared = s.client_share_arith(&counts, 64).unwrap();
        let k = secure_config_k(&mut s, &shared, threshold, v).unwrap();
        assert_eq!(k, plain_k(threshold, v, counts.iter().sum()), "B={threshold} V={v} {counts:?}");
    }
}

#[test]
fn merge_network_merges_every_zero_one_input() {
    for half in [1usize, 2, 4, 8] {
        let layers = merge_layers(half);
        for a_ones in 0..=half {
            for b_ones in 0..=half {
                let mut v: Vec<u8> = (0..half).map(|i| (i >= half - a_ones) as u8).collect();
                v.extend((0..half).map(|i| (i >= half - b_ones) as u8));
                for layer in &layers {
                    for &(x, y) in layer {
                        if v[x] > v[y] {
                            v.swap(x, y);
                        }
                    }
                }
                assert!(v.windows(2).all(|w| w[0] <= w[1]), "half={half}");
            }
        }
        assert_eq!(layers.len(), (2 * half).trailing_zeros() as usize);
    }
}

#[test]
fn compare_exchange_examples() {
    let mut s = Session::setup(b"cx");
    // records [key, attr]
    let a = s.client_share(&[5, 50, 7, 70, 9, 90], 64).unwrap();
    let b = s.client_share(&[3, 30, 7, 71, 12, 120], 64).unwrap();
    let (lo, hi) = compare_exchange(&mut s, &a, &b, 2).unwrap();
    assert_eq!(s.reveal(&lo).unwrap(), vec![3, 30, 7, 70, 9, 90]);
    assert_eq!(s.reveal(&hi).unwrap(), vec![5, 50, 7, 71, 12, 120]);
}

fn integrate_plain(s: &mut Session, parts: &[LocalPartition]) -> PartitionedGraph {
    let shares: Vec<ProviderShares> = parts.iter().map(|p| share_in_session(s, p).unwrap()).collect();
    integrate(s, &shares).unwrap()
}

#[test]
fn integrate_single_provider_is_identity() {
    let mut s = Session::setup(b"int-1");
    let cfg = GlobalConfig::new(8, 2, DEFAULT_THRESHOLD, 1).unwrap();
    let p = local_process(&edges(&[(1, 2), (1, 1), (8, 3)]), &cfg, 1).unwrap();
    let g = integrate_plain(&mut s, std::slice::from_ref(&p));
    assert_eq!(g.l, p.l);
    assert_eq!(g.reconstruct_in_simulation(), p.blocks);
}

#[test]
fn integrate_two_runs() {
    let mut s = Session::setup(b"int-2");
    let cfg = GlobalConfig::new(2, 2, DEFAULT_THRESHOLD, 1).unwrap();
    let a = local_process(&edges(&[(1, 2)]), &cfg, 0).unwrap();
    let b = local_process(&edges(&[(1, 1)]), &cfg, 0).unwrap();
    let g = integrate_plain(&mut s, &[a, b]);
    assert_eq!(g.reconstruct_in_simulation(), vec![edges(&[(1, 1), (1, 2)])]);
}

#[test]
fn integrate_random_providers_matches_sorted_union() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    for n_providers in [2usize, 3, 5] {
        let mut s = Session::setup(format!("int-rand-{n_providers}").as_bytes());
        let cfg = GlobalConfig::new(32, 8, DEFAULT_THRESHOLD, 1).unwrap();
        let parts: Vec<LocalPartition> = (0..n_providers)
            .map(|_| {
                let m = rng.gen_range(0..60);
                let pad = rng.gen_range(0..3);
                local_process(&random_edges(&mut rng, m, 32, 1), &cfg, pad).unwrap()
            })
            .collect();
        let g = integrate_plain(&mut s, &parts);
        assert_eq!(g.l, parts.iter().map(|p| p.l).sum::<usize>());
        let blocks = g.reconstruct_in_simulation();
        for (bi, block) in blocks.iter().enumerate() {
            assert_eq!(block.len(), g.l);
            assert!(block.windows(2).all(|w| w[0].key() <= w[1].key()));
            let mut want: Vec<EdgeRecord> = parts.iter().flat_map(|p| p.blocks[bi].clone()).collect();
            let mut got = block.clone();
            want.sort();
            got.sort();
            assert_eq!(got, want, "block {bi}");
        }
    }
}

#[test]
fn integrate_rejects_mismatched_configs() {
    let mut s = Session::setup(b"int-bad");
    let a = local_process(&[], &GlobalConfig::new(8, 2, DEFAULT_THRESHOLD, 1).unwrap(), 0).unwrap();
    let b = local_process(&[], &GlobalConfig::new(8, 4, DEFAULT_THRESHOLD, 1).unwrap(), 0).unwrap();
    let shares = vec![share_in_session(&mut s, &a).unwrap(), share_in_session(&mut s, &b).unwrap()];
    assert!(integrate(&mut s, &shares).is_err());
    assert!(integrate(&mut s, &[]).is_err());
}
