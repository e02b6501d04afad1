/**
 * The 1-D CNN: overlapping convolution blocks, max pooling, dropout.
 *
 * Convolutions are expressed as patch extraction (im2col over the layer
 * input) followed by a dense layer applied per position, which is the
 * same arithmetic as conv1d but trains on backends without dedicated
 * convolution-gradient kernels (the WASM backend here).  All sizes live
 * in MODEL_CONFIG so a run's architecture is recorded with its results.
 */

import * as tf from "@tensorflow/tfjs";

export interface ModelConfig {
  conv1Filters: number;
  conv1Kernel: number;
  conv1Stride: number;
  conv2Filters: number;
  conv2Kernel: number;
  pool: number;
  dense: number;
  dropoutConv: number;
  dropoutDense: number;
  /** intensities are contrast-boosted with x -> x^inputGamma before training */
  inputGamma: number;
  seed: number;
}

export const MODEL_CONFIG: ModelConfig = {
  conv1Filters: 40,
  conv1Kernel: 12,
  conv1Stride: 4,
  conv2Filters: 80,
  conv2Kernel: 8,
  pool: 2,
  dense: 224,
  dropoutConv: 0.1,
  dropoutDense: 0.25,
  inputGamma: 0.5,
  seed: 1234,
};

/** im2col: [n, positions, channels] -> [n, P, kernel*channels]. */
export class Patches extends tf.layers.Layer {
  static className = "Patches";
  private k: number;
  private s: number;

  constructor(config: { k: number; s: number; name?: string }) {
    super({ name: config.name });
    this.k = config.k;
    this.s = config.s;
  }

  computeOutputShape(inputShape: tf.Shape): tf.Shape {
    const [batch, len, channels] = inputShape as number[];
    const positions = Math.floor((len - this.k) / this.s) + 1;
    return [batch, positions, this.k * channels];
  }

  call(inputs: tf.Tensor | tf.Tensor[]): tf.Tensor {
    return tf.tidy(() => {
      const x = (Array.isArray(inputs) ? inputs[0] : inputs) as tf.Tensor3D;
      const [n, len, channels] = x.shape;
      const positions = Math.floor((len - this.k) / this.s) + 1;
      const cols: tf.Tensor3D[] = [];
      for (let i = 0; i < this.k; i++) {
        let slice = tf.slice(x, [0, i, 0], [n, (positions - 1) * this.s + 1, channels]);
        if (this.s > 1) {
          slice = tf.stridedSlice(
            slice, [0, 0, 0], slice.shape as number[], [1, this.s, 1]
          ) as tf.Tensor3D;
        }
        cols.push(slice as tf.Tensor3D);
      }
      return tf.concat(cols, 2);
    });
  }

  getConfig(): tf.serialization.ConfigDict {
    return { ...super.getConfig(), k: this.k, s: this.s };
  }
}
tf.serialization.registerClass(Patches);

export function patchCount(nPoints: number, cfg: ModelConfig = MODEL_CONFIG): number {
  return Math.floor((nPoints - cfg.conv1Kernel) / cfg.conv1Stride) + 1;
}

/**
 * Build the classifier.  The input is the first convolution's patch
 * tensor [positions, conv1Kernel]: extracting fixed input patches ahead
 * of time is pure preprocessing and halves training time.
 */
export function buildModel(
  nPoints: number,
  nClasses: number,
  cfg: ModelConfig = MODEL_CONFIG
): tf.Sequential {
  if (nClasses < 2) {
    throw new Error(`nClasses=${nClasses} must be >= 2`);
  }
  const positions = patchCount(nPoints, cfg);
  const init = (seedOffset: number) =>
    tf.initializers.glorotUniform({ seed: cfg.seed + seedOffset });
  const model = tf.sequential();
  model.add(tf.layers.inputLayer({ inputShape: [positions, cfg.conv1Kernel] }));
  // conv block 1 (input patches precomputed by the loader)
  model.add(tf.layers.dense({
    units: cfg.conv1Filters, activation: "relu", kernelInitializer: init(1),
  }));
  model.add(tf.layers.maxPooling1d({ poolSize: cfg.pool }));
  model.add(tf.layers.dropout({ rate: cfg.dropoutConv, seed: cfg.seed + 11 }));
  // conv block 2
  model.add(new Patches({ k: cfg.conv2Kernel, s: 1 }));
  model.add(tf.layers.dense({
    units: cfg.conv2Filters, activation: "relu", kernelInitializer: init(2),
  }));
  model.add(tf.layers.maxPooling1d({ poolSize: cfg.pool }));
  model.add(tf.layers.dropout({ rate: cfg.dropoutConv, seed: cfg.seed + 12 }));
  // head
  model.add(tf.layers.flatten());
  model.add(tf.layers.dense({
    units: cfg.dense, activation: "relu", kernelInitializer: init(3),
  }));
  model.add(tf.layers.dropout({ rate: cfg.dropoutDense, seed: cfg.seed + 13 }));
  model.add(tf.layers.dense({
    units: nClasses, activation: "softmax", kernelInitializer: init(4),
  }));
  return model;
}
