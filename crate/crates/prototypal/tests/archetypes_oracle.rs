//! Fit-level oracles: monotone traces, the k-means limit against Lloyd's
//! algorithm, Gram/coordinate consistency, and outlier robustness.

use prototypal::archetypes::{
    fit_archetypal, fit_prototypal, initial_prototypes, FitOptions, PrototypeModel,
};
use prototypal::gram::{gram_matrix, GramItem, GramMatrix};
use prototypal::kernel::KernelSpec;
use prototypal::rng::SplitMix64;

fn linear_gram(points: &[Vec<f64>]) -> GramMatrix {
    let items: Vec<GramItem> = points.iter().map(|p| GramItem::Vector(&p[..])).collect();
    gram_matrix(&items, &KernelSpec::Linear).unwrap()
}

fn random_points(rng: &mut SplitMix64, n: usize, d: usize, scale: f64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            (0..d)
                .map(|_| (rng.next_f64() * 2.0 - 1.0) * scale)
                .collect()
        })
        .collect()
}

/// Box-Muller normals driven by the crate's own deterministic generator.
fn normal(rng: &mut SplitMix64) -> f64 {
    let u1 = rng.next_f64().max(1e-12);
    let u2 = rng.next_f64();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Materialized prototype coordinates `u_j = Σ_l b_jl x_l`.
fn prototypes_in_coords(model: &PrototypeModel, pts: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let d = pts[0].len();
    (0..model.k())
        .map(|j| {
            let bj = model.prototype_weights(j);
            let mut u = vec![0.0; d];
            for (w, p) in bj.iter().zip(pts) {
                for (uc, pc) in u.iter_mut().zip(p) {
                    *uc += w * pc;
                }
            }
            u
        })
        .collect()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Dense-coordinate evaluation of the prototypal objective.
fn dense_objective(model: &PrototypeModel, pts: &[Vec<f64>]) -> f64 {
    let us = prototypes_in_coords(model, pts);
    let d = pts[0].len();
    let mut total = 0.0;
    for (i, x) in pts.iter().enumerate() {
        let ai = model.point_weights(i);
        let mut xhat = vec![0.0; d];
        for (w, u) in ai.iter().zip(&us) {
            for (xc, uc) in xhat.iter_mut().zip(u) {
                *xc += w * uc;
            }
        }
        total += sq_dist(x, &xhat);
        for (w, u) in ai.iter().zip(&us) {
            total += model.lambda() * w * sq_dist(x, u);
        }
    }
    total
}

#[test]
fn traces_are_monotone_across_the_hyperparameter_grid() {
    let mut rng = SplitMix64::new(60);
    let pts = random_points(&mut rng, 40, 3, 1.5);
    let g = linear_gram(&pts);
    for lambda in [0.0, 0.05, 1.0, 1e6] {
        for k in 1..=8 {
            let opts = FitOptions {
                seed: 1000 + k as u64,
                ..FitOptions::default()
            };
            let model = fit_prototypal(&g, k, lambda, &opts).unwrap();
            for pair in model.objective_trace().windows(2) {
                assert!(
                    pair[1] <= pair[0] + 1e-10,
                    "lambda {lambda}, k {k}: {} -> {}",
                    pair[0],
                    pair[1]
                );
            }
            // Feasibility after every fit: all weight rows stay on the simplex.
            for i in 0..model.n() {
                let row = model.point_weights(i);
                assert!(row.iter().all(|&v| v >= 0.0));
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
            for j in 0..model.k() {
                let row = model.prototype_weights(j);
                assert!(row.iter().all(|&v| v >= 0.0));
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn lambda_zero_traces_equal_archetypal_on_random_instances() {
    let mut rng = SplitMix64::new(61);
    for case in 0..20 {
        let n = 5 + rng.next_below(30);
        let d = 1 + rng.next_below(4);
        let pts = random_points(&mut rng, n, d, 2.0);
        let g = linear_gram(&pts);
        let k = 1 + rng.next_below(n.min(6));
        let opts = FitOptions {
            seed: case as u64,
            ..FitOptions::default()
        };
        let p = fit_prototypal(&g, k, 0.0, &opts).unwrap();
        let a = fit_archetypal(&g, k, &opts).unwrap();
        assert_eq!(p.objective_trace(), a.objective_trace(), "case {case}");
    }
}

/// Plain Lloyd iteration on coordinates, ties to the lowest index.
fn lloyd(pts: &[Vec<f64>], mut centers: Vec<Vec<f64>>, max_iter: usize) -> Vec<usize> {
    let d = pts[0].len();
    let k = centers.len();
    let mut assign = vec![0usize; pts.len()];
    for _ in 0..max_iter {
        let mut changed = false;
        for (i, x) in pts.iter().enumerate() {
            let mut best = 0;
            let mut best_d = sq_dist(x, &centers[0]);
            for (j, c) in centers.iter().enumerate().skip(1) {
                let dist = sq_dist(x, c);
                if dist < best_d {
                    best_d = dist;
                    best = j;
                }
            }
            if assign[i] != best {
                assign[i] = best;
                changed = true;
            }
        }
        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for (i, x) in pts.iter().enumerate() {
            counts[assign[i]] += 1;
            for (s, xc) in sums[assign[i]].iter_mut().zip(x) {
                *s += xc;
            }
        }
        for j in 0..k {
            if counts[j] > 0 {
                for s in sums[j].iter_mut() {
                    *s /= counts[j] as f64;
                }
                centers[j] = sums[j].clone();
            }
        }
        if !changed {
            break;
        }
    }
    assign
}

#[test]
#[allow(clippy::needless_range_loop)]
fn huge_lambda_reproduces_lloyd_on_separated_blobs() {
    // Three well-separated 2D Gaussian blobs; lambda = 1e6 must behave as
    // k-means: one-hot assignments to the nearest prototype, prototypes at
    // the barycenters, and the same assignments as Lloyd started from the
    // same initial points.
    let mut rng = SplitMix64::new(42);
    let centers = [[0.0, 0.0], [6.0, 0.0], [0.0, 6.0]];
    let mut pts = Vec::new();
    for c in &centers {
        for _ in 0..30 {
            pts.push(vec![
                c[0] + 0.4 * normal(&mut rng),
                c[1] + 0.4 * normal(&mut rng),
            ]);
        }
    }
    let g = linear_gram(&pts);
    let opts = FitOptions {
        seed: 5,
        ..FitOptions::default()
    };
    let model = fit_prototypal(&g, 3, 1e6, &opts).unwrap();

    let us = prototypes_in_coords(&model, &pts);
    let mean: Vec<f64> = (0..2)
        .map(|c| pts.iter().map(|p| p[c]).sum::<f64>() / pts.len() as f64)
        .collect();
    let radius = pts
        .iter()
        .map(|p| sq_dist(p, &mean).sqrt())
        .fold(0.0f64, f64::max);

    // (a) every reconstruction row is one-hot on the nearest prototype.
    let mut assign = Vec::with_capacity(pts.len());
    for (i, x) in pts.iter().enumerate() {
        let ai = model.point_weights(i);
        let mut arg = 0;
        for (j, w) in ai.iter().enumerate() {
            if *w > ai[arg] {
                arg = j;
            }
        }
        assert!(ai[arg] > 1.0 - 1e-6, "row {i} not one-hot: {ai:?}");
        let nearest = (0..3)
            .min_by(|&a, &b| sq_dist(x, &us[a]).total_cmp(&sq_dist(x, &us[b])))
            .expect("non-empty");
        assert_eq!(arg, nearest, "row {i} not assigned to nearest prototype");
        assign.push(arg);
    }

    // (b) prototype mixing weights are uniform over the assigned points and
    // the prototypes sit at the assigned barycenters.
    for j in 0..3 {
        let members: Vec<usize> = (0..pts.len()).filter(|&i| assign[i] == j).collect();
        assert!(!members.is_empty());
        let bj = model.prototype_weights(j);
        let expected = 1.0 / members.len() as f64;
        for (l, w) in bj.iter().enumerate() {
            let want = if members.contains(&l) { expected } else { 0.0 };
            assert!(
                (w - want).abs() < 1e-6,
                "prototype {j}, weight {l}: {w} vs {want}"
            );
        }
        let mut bary = vec![0.0; 2];
        for &i in &members {
            for (b, x) in bary.iter_mut().zip(&pts[i]) {
                *b += x / members.len() as f64;
            }
        }
        assert!(
            sq_dist(&us[j], &bary).sqrt() <= 1e-6 * radius,
            "prototype {j} off barycenter by {}",
            sq_dist(&us[j], &bary).sqrt()
        );
    }

    // (c) assignments match Lloyd's algorithm from the same initial points.
    let init = initial_prototypes(&g, 3, opts.seed).unwrap();
    let lloyd_assign = lloyd(&pts, init.iter().map(|&i| pts[i].clone()).collect(), 200);
    // Map prototype indices by nearest center to compare labelings.
    assert_eq!(assign, lloyd_assign);
}

#[test]
fn gram_objective_matches_dense_coordinates() {
    let mut rng = SplitMix64::new(17);
    for case in 0..10 {
        let n = 8 + rng.next_below(20);
        let pts = random_points(&mut rng, n, 2, 1.0);
        let g = linear_gram(&pts);
        let k = 1 + rng.next_below(4.min(n));
        let lambda = [0.0, 0.2, 2.0][case % 3];
        let opts = FitOptions {
            seed: 300 + case as u64,
            ..FitOptions::default()
        };
        let model = fit_prototypal(&g, k, lambda, &opts).unwrap();
        let dense = dense_objective(&model, &pts);
        assert!(
            (model.objective() - dense).abs() <= 1e-9 * (1.0 + dense.abs()),
            "case {case}: gram {} vs dense {dense}",
            model.objective()
        );
    }
}

#[test]
fn locality_penalty_damps_outlier_pull() {
    // A blob plus one outlier at five data radii. Displacement is measured
    // from the no-outlier fit: for every prototype of the clean fit, the
    // distance to the nearest prototype of the outlier fit — how far the
    // original prototype locations moved when the outlier arrived. The
    // penalized fit keeps its prototypes in place; archetypes rearrange
    // around the enlarged hull.
    let mut rng = SplitMix64::new(88);
    let clean: Vec<Vec<f64>> = (0..60)
        .map(|_| vec![0.5 * normal(&mut rng), 0.5 * normal(&mut rng)])
        .collect();
    let radius = clean
        .iter()
        .map(|p| (p[0] * p[0] + p[1] * p[1]).sqrt())
        .fold(0.0f64, f64::max);
    let mut dirty = clean.clone();
    dirty.push(vec![5.0 * radius, 0.0]);

    let displacement = |lambda: f64, seed: u64| {
        let opts = FitOptions {
            seed,
            ..FitOptions::default()
        };
        let m_clean = fit_prototypal(&linear_gram(&clean), 4, lambda, &opts).unwrap();
        let m_dirty = fit_prototypal(&linear_gram(&dirty), 4, lambda, &opts).unwrap();
        let u_clean = prototypes_in_coords(&m_clean, &clean);
        let u_dirty = prototypes_in_coords(&m_dirty, &dirty);
        u_clean
            .iter()
            .map(|uc| {
                u_dirty
                    .iter()
                    .map(|ud| sq_dist(uc, ud).sqrt())
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0f64, f64::max)
    };

    for seed in [1, 2, 3] {
        let proto = displacement(0.05, seed);
        let arch = displacement(0.0, seed);
        assert!(
            proto < arch,
            "seed {seed}: prototypal displacement {proto} not below archetypal {arch}"
        );
    }
}

#[test]
fn unit_square_corners_reconstruct_exactly() {
    let pts = vec![
        vec![0.0, 0.0],
        vec![1.0, 0.0],
        vec![0.0, 1.0],
        vec![1.0, 1.0],
    ];
    let g = linear_gram(&pts);
    let model = fit_archetypal(&g, 4, &FitOptions::default()).unwrap();
    assert!(model.objective() < 1e-8, "objective {}", model.objective());
    // Archetypes land on the corners: every mixing row is (near) one-hot.
    for j in 0..4 {
        let bj = model.prototype_weights(j);
        let max = bj.iter().cloned().fold(0.0f64, f64::max);
        assert!(max > 1.0 - 1e-4, "row {j}: {bj:?}");
    }
}
