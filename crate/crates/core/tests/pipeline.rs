use screamsim::apps::{self, App, AppConfig, Pipeline, Scene};
use screamsim::ops::Backend;
use screamsim::GrayImage;

fn crop(img: &GrayImage, x0: usize, y0: usize, size: usize) -> GrayImage {
    GrayImage::from_fn(size, size, |x, y| img.get(x0 + x, y0 + y)).unwrap()
}

fn cropped(scene: &Scene, size: usize) -> Scene {
    match scene {
        Scene::Matte { fg, bg, alpha } => Scene::Matte {
            fg: crop(fg, 20, 20, size),
            bg: crop(bg, 20, 20, size),
            alpha: crop(alpha, 20, 20, size),
        },
        Scene::Upscale(img) => Scene::Upscale(crop(img, 20, 20, size)),
    }
}

fn first_scene(app: App, size: usize) -> Scene {
    cropped(&apps::corpus_scenes(app)[0].1, size)
}

#[test]
fn long_streams_approach_the_exact_result() {
    let cfg = AppConfig::default().with_n(4096).with_seed(11);
    for app in App::ALL {
        let q = apps::run(app, &first_scene(app, 16), &cfg, Pipeline::Stochastic(Backend::Cim))
            .unwrap()
            .quality;
        assert!(q.psnr >= 30.0, "{}: {:.2} dB", app.name(), q.psnr);
    }
}

#[test]
fn backends_agree_without_faults() {
    let cfg = AppConfig::default().with_n(64).with_seed(3);
    for app in App::ALL {
        let scene = first_scene(app, 12);
        let cim = apps::run(app, &scene, &cfg, Pipeline::Stochastic(Backend::Cim)).unwrap();
        let sw = apps::run(app, &scene, &cfg, Pipeline::Stochastic(Backend::Software)).unwrap();
        assert_eq!(cim.output, sw.output, "{}", app.name());
        assert!(sw.ledger.is_empty() || sw.ledger.sl_senses() <= cim.ledger.sl_senses());
    }
}

#[test]
fn runs_are_reproducible() {
    let cfg = AppConfig::default().with_n(32).with_p_f(0.01).with_seed(8);
    for app in App::ALL {
        let scene = first_scene(app, 10);
        let a = apps::run(app, &scene, &cfg, Pipeline::Stochastic(Backend::Cim)).unwrap();
        let b = apps::run(app, &scene, &cfg, Pipeline::Stochastic(Backend::Cim)).unwrap();
        assert_eq!(a.output, b.output);
        assert_eq!(a.ledger, b.ledger);
        let c = apps::run(
            app,
            &scene,
            &cfg.clone().with_seed(9),
            Pipeline::Stochastic(Backend::Cim),
        )
        .unwrap();
        assert_ne!(a.output, c.output, "{}", app.name());
    }
}

#[test]
fn fault_free_binary_is_exact() {
    let cfg = AppConfig::default();
    for app in [App::Composite, App::Bilinear] {
        let q = apps::run(app, &first_scene(app, 16), &cfg, Pipeline::Binary)
            .unwrap()
            .quality;
        assert!(q.psnr.is_infinite(), "{}: {}", app.name(), q.psnr);
        assert!((q.ssim - 1.0).abs() < 1e-12);
    }
}

#[test]
fn faults_hurt_binary_more_than_stochastic() {
    let app = App::Composite;
    let scene = first_scene(app, 24);
    let clean = AppConfig::default().with_n(128).with_seed(5);
    let faulty = clean.clone().with_p_f(0.01);
    let sc_clean = apps::run(app, &scene, &clean, Pipeline::Stochastic(Backend::Cim))
        .unwrap()
        .quality
        .ssim;
    let sc_faulty = apps::run(app, &scene, &faulty, Pipeline::Stochastic(Backend::Cim))
        .unwrap()
        .quality
        .ssim;
    let bin_faulty = apps::run(app, &scene, &faulty, Pipeline::Binary).unwrap().quality.ssim;
    assert!(
        sc_clean - sc_faulty < 1.0 - bin_faulty,
        "sc {sc_clean:.3}->{sc_faulty:.3}, binary 1->{bin_faulty:.3}"
    );
}

#[test]
fn scene_kind_must_fit_the_app() {
    let upscale = first_scene(App::Bilinear, 8);
    let matte = first_scene(App::Composite, 8);
    let cfg = AppConfig::default().with_n(8);
    assert!(apps::run(App::Composite, &upscale, &cfg, Pipeline::Binary).is_err());
    assert!(apps::run(App::Bilinear, &matte, &cfg, Pipeline::Binary).is_err());
    assert!(apps::run(
        App::Matting,
        &matte,
        &cfg.clone().with_n(0),
        Pipeline::Stochastic(Backend::Software)
    )
    .is_err());
}
