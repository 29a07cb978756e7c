//! Rough single-core cost probes; run explicitly with --ignored.

use std::time::Instant;

use camadapt::data;
use camadapt::imitation::{self, DaggerConfig};
use camadapt::nets::{bc_batch_loss_grad, ParamSet, Sample};
use camadapt::render::CameraConfig;
use camadapt::rng::SeedStream;
use camadapt::sim;

#[test]
#[ignore]
fn timing_probe() {
    let cam = CameraConfig::default();

    let t0 = Instant::now();
    let ds = imitation::record_expert_demos(10, &cam, 1);
    let frames = ds.total_frames();
    println!(
        "record 10 episodes ({frames} frames): {:?} ({:?}/frame)",
        t0.elapsed(),
        t0.elapsed() / frames as u32
    );

    let params = ParamSet::<f32>::init(2);
    let samples: Vec<Sample<'_>> = ds
        .episodes
        .iter()
        .flat_map(|e| e.frames.iter())
        .take(250)
        .map(|f| Sample {
            ext: &f.ext_image,
            eih: &f.eih_image,
            proprio: f.proprio.map(|v| v as f64),
            action: f.expert_action.map(|v| v as f64),
        })
        .collect();
    let t0 = Instant::now();
    let (l, _) = bc_batch_loss_grad(&params, &samples);
    println!("bc grad batch {}: {:?} (loss {l:.4})", samples.len(), t0.elapsed());

    let t0 = Instant::now();
    let mut p = params.clone();
    imitation::train_bc(&ds, &mut p, 1, 250, 1e-3, 3).unwrap();
    println!("1 bc epoch over {frames} frames: {:?}", t0.elapsed());

    // policy-driven rollout (predict per step)
    let mut cfg_rng = SeedStream::new(9, "cfg", 0);
    let obj = sim::sample_object_config(&mut cfg_rng);
    let t0 = Instant::now();
    let mut driver = imitation::NetPolicy { params: &p };
    let ep = data::record_episode(&mut driver, &obj, &cam, 0, "probe");
    println!("policy rollout ({} frames): {:?}", ep.frames.len(), t0.elapsed());

    // tiny dagger end-to-end extrapolation point
    let t0 = Instant::now();
    let cfg = DaggerConfig { rounds: 1, epochs_per_round: 2, ..DaggerConfig::default() };
    imitation::train_dagger(10, &cam, &cfg, 11).unwrap();
    println!("dagger n=10 rounds=1 epochs=2: {:?}", t0.elapsed());
}

#[test]
#[ignore]
fn encoder_probe() {
    use camadapt::nets::encoder;
    use std::time::Instant;

    let cam = CameraConfig::default();
    let ds = imitation::record_expert_demos(1, &cam, 1);
    let imgs: Vec<&camadapt::render::Image> =
        std::iter::repeat(&ds.episodes[0].frames[0].ext_image).take(16).collect();
    let p = encoder::EncoderParams::<f32>::init(1, "ext");

    let t0 = Instant::now();
    let n = 20;
    let mut feat_sum = 0f32;
    for _ in 0..n {
        let x = encoder::images_to_batch::<f32>(&imgs);
        let (f, _) = encoder::forward(&p, x, 16);
        feat_sum += f[0];
    }
    println!("forward chunk16: {:?}/chunk (sum {feat_sum})", t0.elapsed() / n);

    let x = encoder::images_to_batch::<f32>(&imgs);
    let (f, tape) = encoder::forward(&p, x, 16);
    let dfeat = vec![1e-3f32; f.len()];
    let t0 = Instant::now();
    let mut g0 = 0f32;
    for _ in 0..n {
        let g = encoder::backward(&p, &tape, &dfeat);
        g0 += g.t[0][0];
    }
    println!("backward chunk16: {:?}/chunk (g0 {g0})", t0.elapsed() / n);
}

/// Calibration: DAgger at a few demo budgets with paper defaults,
/// action-prediction accuracy on held-out frames.
#[test]
#[ignore]
fn dagger_calibration() {
    use camadapt::harness;
    let cam = CameraConfig::default();
    let eval_ds = imitation::record_expert_demos(20, &cam, 777);
    let idx: Vec<usize> = (0..eval_ds.episodes.len()).collect();
    let eval = harness::eval_frames(&eval_ds, &idx);
    for n in [10usize, 20, 40] {
        let t0 = Instant::now();
        let (params, ds) =
            imitation::train_dagger(n, &cam, &DaggerConfig::default(), 100 + n as u64).unwrap();
        let rate = harness::success_rate(&params, &eval, 0.01).unwrap();
        let cl = harness::closed_loop_success(&params, 20, 555);
        println!(
            "dagger n={n}: acc {rate:.4} closed-loop {cl:.2} ({} eps, {} frames) in {:?}",
            ds.episodes.len(),
            ds.total_frames(),
            t0.elapsed()
        );
    }
}

#[test]
#[ignore]
fn meta_divergence_probe() {
    use camadapt::meta::{self, MetaObjective};
    use camadapt::nets::ParamSet;

    let base = CameraConfig::default();
    let cams = [
        CameraConfig::new(45.0, 45.0, 1.0),
        CameraConfig::new(160.0, 50.0, 1.1),
    ];
    let mut params = ParamSet::<f32>::init(SeedStream::new(21, "init", 0).fork_seed());
    let ds = imitation::record_expert_demos(3, &base, 21);
    imitation::train_bc(&ds, &mut params, 1, 50, 1e-3, 1).unwrap();

    let vs = meta::record_view_data(&base, &cams, 3, 1, 0.01, 5);
    let targets = meta::build_baseline_targets(&params.ext, &vs.baseline);
    let task = meta::build_meta_task(&vs.views[1].1, &targets, cams[1], 2, 5).unwrap();
    let obj = meta::EncoderAlignment::from_task(&task);
    let support = task.pair_indices(&task.split.support);
    let mut theta = params.ext.to_flat();
    for step in 0..8 {
        let (l, g) = obj.grad(&theta, &support);
        let gn = g.iter().map(|v| (*v as f64) * (*v as f64)).sum::<f64>().sqrt();
        println!("step {step}: loss {l:.6e} grad norm {gn:.4e}");
        for (t, gi) in theta.iter_mut().zip(&g) {
            *t -= 0.01 * *gi;
        }
    }
}

#[test]
#[ignore]
fn inner_lr_sweep() {
    use camadapt::meta::{self, MetaObjective};
    use camadapt::nets::ParamSet;

    let base = CameraConfig::default();
    let cams = [
        CameraConfig::new(45.0, 45.0, 1.0),
        CameraConfig::new(160.0, 50.0, 1.1),
    ];
    let mut params = ParamSet::<f32>::init(SeedStream::new(21, "init", 0).fork_seed());
    let ds = imitation::record_expert_demos(3, &base, 21);
    imitation::train_bc(&ds, &mut params, 1, 50, 1e-3, 1).unwrap();

    let vs = meta::record_view_data(&base, &cams, 3, 1, 0.01, 5);
    let targets = meta::build_baseline_targets(&params.ext, &vs.baseline);
    let task = meta::build_meta_task(&vs.views[1].1, &targets, cams[1], 2, 5).unwrap();
    let obj = meta::EncoderAlignment::from_task(&task);
    let support = task.pair_indices(&task.split.support);
    for lr in [1e-3f32, 3e-4, 1e-4, 5e-5, 2e-5] {
        let mut theta = params.ext.to_flat();
        let mut l0 = 0.0;
        let mut lk = 0.0;
        for step in 0..40 {
            let (l, g) = obj.grad(&theta, &support);
            if step == 0 {
                l0 = l;
            }
            lk = l;
            if !l.is_finite() {
                break;
            }
            for (t, gi) in theta.iter_mut().zip(&g) {
                *t -= lr * *gi;
            }
        }
        println!("lr {lr:.0e}: loss {l0:.4e} -> {lk:.4e} after 40 steps");
    }
}

#[test]
#[ignore]
fn bc_quality_probe() {
    use camadapt::harness;
    use camadapt::nets::ParamSet;
    let cam = CameraConfig::default();
    let ds = imitation::record_expert_demos(10, &cam, 777);
    let idx: Vec<usize> = (0..ds.episodes.len()).collect();
    let eval = harness::eval_frames(&ds, &idx);
    let mut params = ParamSet::<f32>::init(SeedStream::new(777, "init", 0).fork_seed());
    let t0 = Instant::now();
    for block in 0..12 {
        imitation::train_bc(&ds, &mut params, 30, 32, 1e-3, 777 + block).unwrap();
        let acc = harness::success_rate(&params, &eval, 0.01).unwrap();
        let acc2 = harness::success_rate(&params, &eval, 0.02).unwrap();
        let samples: Vec<camadapt::nets::Sample> = eval
            .iter()
            .map(|(e, i, p, a)| camadapt::nets::Sample { ext: e, eih: i, proprio: *p, action: *a })
            .collect();
        let (loss, _) = camadapt::nets::bc_batch_loss_grad::<f32>(&params, &samples);
        println!(
            "epochs {:3}: train loss {loss:.5e} acc@0.01 {acc:.3} acc@0.02 {acc2:.3} ({:?})",
            (block + 1) * 10,
            t0.elapsed()
        );
    }
}

#[test]
#[ignore]
fn dagger_full_scale_probe() {
    use camadapt::harness;
    let cam = CameraConfig::default();
    let eval_ds = imitation::record_expert_demos(20, &cam, 123_456);
    let idx: Vec<usize> = (0..eval_ds.episodes.len()).collect();
    let eval = harness::eval_frames(&eval_ds, &idx);
    let t0 = Instant::now();
    let cfg = DaggerConfig {
        lr_schedule: Some(vec![3e-3, 3e-3, 3e-3, 1e-3, 3e-4, 1e-4, 3e-5]),
        ..DaggerConfig::default()
    };
    let (params, ds) = imitation::train_dagger(100, &cam, &cfg, 7000).unwrap();
    let rate = harness::success_rate(&params, &eval, 0.01).unwrap();
    let rate2 = harness::success_rate(&params, &eval, 0.02).unwrap();
    println!(
        "dagger n=100: acc@0.01 {rate:.4} acc@0.02 {rate2:.4} ({} eps, {} frames) in {:?}",
        ds.episodes.len(),
        ds.total_frames(),
        t0.elapsed()
    );
}

#[test]
#[ignore]
fn position_decodability_probe() {
    use camadapt::meta::{AlignPair, EncoderAlignment, MetaObjective};
    use camadapt::nets::{Adam, EncoderParams};
    use camadapt::render;
    use camadapt::sim;

    let cam = CameraConfig::default();
    let mut rng = SeedStream::new(424242, "decode", 0);
    let pairs: Vec<AlignPair> = (0..400)
        .map(|_| {
            let cfg = sim::sample_object_config(&mut rng);
            let s = sim::reset(&cfg);
            let img = render::render(&s, &cam);
            let mut target = [0.0f32; 32];
            target[0] = cfg.obj_xy[0] as f32;
            target[1] = cfg.obj_xy[1] as f32;
            target[2] = cfg.goal_xy[0] as f32;
            target[3] = cfg.goal_xy[1] as f32;
            AlignPair {
                eih_image: img.clone(),
                ext_image: img,
                target,
                proprio: [0.0; 4],
                expert_action: [0.0; 4],
            }
        })
        .collect();
    let obj = EncoderAlignment::new(pairs.iter().collect());
    let train: Vec<usize> = (0..320).collect();
    let test: Vec<usize> = (320..400).collect();

    let mut theta = EncoderParams::<f32>::init(77, "ext").to_flat();
    let mut opt = Adam::new(1e-3, theta.len());
    let mut order = SeedStream::new(9, "order", 0);
    let t0 = Instant::now();
    for step in 0..3000 {
        let batch: Vec<usize> =
            (0..32).map(|_| train[order.gen_range(0..train.len())]).collect();
        let (_, g) = MetaObjective::<f32>::grad(&obj, &theta, &batch);
        opt.step(&mut theta, &g, &[]);
        if step % 300 == 299 || step == 0 {
            let lt = MetaObjective::<f32>::loss(&obj, &theta, &train);
            let lv = MetaObjective::<f32>::loss(&obj, &theta, &test);
            println!(
                "step {:4}: train mse {lt:.4e} test mse {lv:.4e} ({:?})",
                step + 1,
                t0.elapsed()
            );
        }
    }
}

#[test]
#[ignore]
fn relative_offset_decodability_probe() {
    use camadapt::meta::{AlignPair, EncoderAlignment, MetaObjective};
    use camadapt::nets::{Adam, EncoderParams};
    use camadapt::render;
    use camadapt::sim;

    let cam = CameraConfig::default();
    let mut rng = SeedStream::new(515151, "rel-decode", 0);
    let pairs: Vec<AlignPair> = (0..400)
        .map(|_| {
            let cfg = sim::sample_object_config(&mut rng);
            let mut s = sim::reset(&cfg);
            s.ee_pos = [
                rng.gen_range(-0.35..=0.35),
                rng.gen_range(-0.35..=0.35),
                rng.gen_range(0.05..=0.35),
            ];
            let img = render::render(&s, &cam);
            let mut target = [0.0f32; 32];
            target[0] = (s.obj_pos[0] - s.ee_pos[0]) as f32;
            target[1] = (s.obj_pos[1] - s.ee_pos[1]) as f32;
            target[2] = (cfg.goal_xy[0] - s.ee_pos[0]) as f32;
            target[3] = (cfg.goal_xy[1] - s.ee_pos[1]) as f32;
            AlignPair {
                eih_image: img.clone(),
                ext_image: img,
                target,
                proprio: [0.0; 4],
                expert_action: [0.0; 4],
            }
        })
        .collect();
    let obj = EncoderAlignment::new(pairs.iter().collect());
    let train: Vec<usize> = (0..320).collect();
    let test: Vec<usize> = (320..400).collect();

    let mut theta = EncoderParams::<f32>::init(77, "ext").to_flat();
    let mut opt = Adam::new(1e-3, theta.len());
    let mut order = SeedStream::new(9, "order", 0);
    let t0 = Instant::now();
    for step in 0..3000 {
        let batch: Vec<usize> =
            (0..32).map(|_| train[order.gen_range(0..train.len())]).collect();
        let (_, g) = MetaObjective::<f32>::grad(&obj, &theta, &batch);
        opt.step(&mut theta, &g, &[]);
        if step % 300 == 299 || step == 0 {
            let lt = MetaObjective::<f32>::loss(&obj, &theta, &train);
            let lv = MetaObjective::<f32>::loss(&obj, &theta, &test);
            println!(
                "step {:4}: train mse {lt:.4e} test mse {lv:.4e} ({:?})",
                step + 1,
                t0.elapsed()
            );
        }
    }
}

#[test]
#[ignore]
fn bc_lr_sweep() {
    use camadapt::harness;
    use camadapt::nets::ParamSet;
    let cam = CameraConfig::default();
    let ds = imitation::record_expert_demos(40, &cam, 4040);
    let eval_ds = imitation::record_expert_demos(20, &cam, 123_456);
    let idx: Vec<usize> = (0..eval_ds.episodes.len()).collect();
    let eval = harness::eval_frames(&eval_ds, &idx);
    let tidx: Vec<usize> = (0..ds.episodes.len()).collect();
    let teval = harness::eval_frames(&ds, &tidx);
    for lr in [1e-3f64, 3e-3] {
        let mut params = ParamSet::<f32>::init(SeedStream::new(711, "init", 0).fork_seed());
        let t0 = Instant::now();
        for block in 0..6 {
            let loss =
                imitation::train_bc(&ds, &mut params, 25, 250, lr, 4100 + block).unwrap();
            let tr = harness::success_rate(&params, &teval, 0.01).unwrap();
            let te = harness::success_rate(&params, &eval, 0.01).unwrap();
            println!(
                "lr {lr:.0e} epochs {:3}: loss {loss:.4e} train-acc {tr:.3} heldout-acc {te:.3} ({:?})",
                (block + 1) * 25,
                t0.elapsed()
            );
        }
    }
}

#[test]
#[ignore]
fn bc_memorization_ceiling_probe() {
    use camadapt::harness;
    use camadapt::nets::ParamSet;
    let cam = CameraConfig::default();
    let ds = imitation::record_expert_demos(10, &cam, 777);
    let idx: Vec<usize> = (0..ds.episodes.len()).collect();
    let eval = harness::eval_frames(&ds, &idx);
    let mut params = ParamSet::<f32>::init(SeedStream::new(777, "init", 0).fork_seed());
    let t0 = Instant::now();
    for (stage, (lr, epochs)) in [(1e-3, 500usize), (3e-4, 400), (1e-4, 300), (3e-5, 200)]
        .into_iter()
        .enumerate()
    {
        for block in 0..epochs / 100 {
            let loss = imitation::train_bc(
                &ds,
                &mut params,
                100,
                32,
                lr,
                9000 + (stage * 10 + block) as u64,
            )
            .unwrap();
            let acc = harness::success_rate(&params, &eval, 0.01).unwrap();
            println!(
                "lr {lr:.0e} block {block}: loss {loss:.4e} train-acc {acc:.3} ({:?})",
                t0.elapsed()
            );
        }
    }
}

#[test]
#[ignore]
fn dagger_decay_validation() {
    use camadapt::harness;
    let cam = CameraConfig::default();
    let eval_ds = imitation::record_expert_demos(20, &cam, 123_456);
    let idx: Vec<usize> = (0..eval_ds.episodes.len()).collect();
    let eval = harness::eval_frames(&eval_ds, &idx);
    let t0 = Instant::now();
    let (params, ds) =
        imitation::train_dagger(40, &cam, &DaggerConfig::default(), 7001).unwrap();
    let rate = harness::success_rate(&params, &eval, 0.01).unwrap();
    let rate2 = harness::success_rate(&params, &eval, 0.02).unwrap();
    let cl = harness::closed_loop_success(&params, 20, 555);
    println!(
        "dagger-decay n=40: acc@0.01 {rate:.4} acc@0.02 {rate2:.4} closed-loop {cl:.2} ({} eps, {} frames) in {:?}",
        ds.episodes.len(),
        ds.total_frames(),
        t0.elapsed()
    );
}
