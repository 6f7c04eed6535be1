// Command-line front end: synthesize data, reduce bands, split samples, train
// the ConvLSTM / CNN models, evaluate, and render classification maps.
#include <CLI11.hpp>
#include <exception>
#include <iostream>

#include "sscl/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"spatial-spectral ConvLSTM networks for hyperspectral image classification"};
  app.require_subcommand(1);

  sscl::PreprocessArgs pre;
  CLI::App* c_pre = app.add_subcommand("preprocess", "normalize and PCA-reduce a cube");
  c_pre->add_option("--cube", pre.cube, "input HSIC cube")->required();
  c_pre->add_option("--labels", pre.labels, "optional HSIL labels (raster check only)");
  c_pre->add_option("--k", pre.components, "number of principal components")->required();
  c_pre->add_flag("!--no-normalize", pre.normalize, "skip per-band normalization");
  c_pre->add_option("--out", pre.out, "output HSIC path")->required();

  sscl::SplitArgs spl;
  CLI::App* c_spl = app.add_subcommand("split", "stratified train/test split");
  c_spl->add_option("--labels", spl.labels, "HSIL label map")->required();
  c_spl->add_option("--fraction", spl.fraction, "training fraction per class");
  c_spl->add_option("--per-class", spl.per_class, "training samples per class");
  c_spl->add_option("--seed", spl.seed, "sampling seed");
  c_spl->add_option("--out", spl.out, "output manifest path")->required();

  sscl::TrainArgs tra;
  CLI::App* c_tra = app.add_subcommand("train", "train a model from a JSON config");
  c_tra->add_option("--config", tra.config, "JSON run config")->required();
  c_tra->add_option("--out", tra.out_dir, "output directory")->required();

  sscl::EvaluateArgs eva;
  CLI::App* c_eva = app.add_subcommand("evaluate", "evaluate checkpoints on the test split");
  c_eva->add_option("--checkpoint", eva.checkpoints, "checkpoint file (repeatable)")->required();
  c_eva->add_option("--cube", eva.cube, "HSIC cube")->required();
  c_eva->add_option("--labels", eva.labels, "HSIL labels")->required();
  c_eva->add_option("--manifest", eva.manifest, "split manifest")->required();
  c_eva->add_flag("!--no-normalize", eva.normalize, "skip normalization before PCA");
  c_eva->add_option("--out", eva.out_dir, "output directory")->required();

  sscl::PredictMapArgs pmp;
  CLI::App* c_pmp = app.add_subcommand("predict-map", "classify every pixel and render a PPM map");
  c_pmp->add_option("--checkpoint", pmp.checkpoint, "checkpoint file")->required();
  c_pmp->add_option("--cube", pmp.cube, "HSIC cube")->required();
  c_pmp->add_flag("!--no-normalize", pmp.normalize, "skip normalization before PCA");
  c_pmp->add_option("--out", pmp.out_dir, "output directory")->required();

  sscl::GradcheckArgs grd;
  CLI::App* c_grd = app.add_subcommand("gradcheck", "finite-difference check of a miniature model");
  c_grd->add_option("--model", grd.model, "cnn2d|cnn3d|sacl2dnn|sscl2dnn|sscl3dnn")->required();
  c_grd->add_option("--seed", grd.seed, "seed");
  c_grd->add_option("--window", grd.window, "miniature window size");
  c_grd->add_option("--k", grd.components, "miniature component count");
  c_grd->add_option("--classes", grd.classes, "miniature class count");
  c_grd->add_option("--samples", grd.samples_per_param, "coordinates checked per parameter");
  c_grd->add_option("--tolerance", grd.tolerance, "max relative error");

  sscl::SynthArgs syn;
  CLI::App* c_syn = app.add_subcommand("synth", "generate a synthetic cube + labels");
  c_syn->add_option("--spec", syn.spec, "JSON synthesis spec")->required();
  c_syn->add_option("--out", syn.out_dir, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (c_pre->parsed()) return sscl::cmd_preprocess(pre);
    if (c_spl->parsed()) return sscl::cmd_split(spl);
    if (c_tra->parsed()) return sscl::cmd_train(tra);
    if (c_eva->parsed()) return sscl::cmd_evaluate(eva);
    if (c_pmp->parsed()) return sscl::cmd_predict_map(pmp);
    if (c_grd->parsed()) return sscl::cmd_gradcheck(grd);
    if (c_syn->parsed()) return sscl::cmd_synth(syn);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
