/**
 * Channel-invariant deformable 3x3 convolution.
 *
 * Each kernel tap samples the input at its integer grid position plus a
 * learned fractional offset. One (dx, dy) pair per tap per output
 * location is shared across every input channel; sampling is bilinear
 * with zero padding outside the image, so an all-zero offset field
 * reproduces the standard 'same'-padded convolution exactly.
 *
 * Built entirely from differentiable ops (floor carries no gradient, so
 * the sampling weights `p - floor(p)` have derivative 1 in p), which
 * gives offset gradients for free; the tests check them against central
 * differences.
 */

import * as tf from '@tensorflow/tfjs';

export const TAPS = 9; // 3x3 kernel
export const OFFSET_CHANNELS = 2 * TAPS; // (dx, dy) per tap

interface Grids {
  rows: tf.Tensor3D; // [1, H, W] row index of each output pixel
  cols: tf.Tensor3D;
}

function indexGrids(h: number, w: number): Grids {
  return tf.tidy(() => {
    const rows = tf.tile(
      tf.reshape(tf.range(0, h, 1, 'float32'), [1, h, 1]),
      [1, 1, w],
    ) as tf.Tensor3D;
    const cols = tf.tile(
      tf.reshape(tf.range(0, w, 1, 'float32'), [1, 1, w]),
      [1, h, 1],
    ) as tf.Tensor3D;
    return { rows, cols };
  });
}

/**
 * Copy a tensor's values into a fresh leaf so the gradient tape does
 * not follow it. Corner coordinates and validity masks are indicator
 * quantities; offset gradients flow only through the bilinear weights.
 */
function detach(t: tf.Tensor): tf.Tensor {
  const data = t.dataSync();
  return tf.tensor(Float32Array.from(data), t.shape as number[], 'float32');
}

/**
 * Bilinear sample of `flat` ([B*H*W, C] row-major over batch, row, col)
 * at float positions (py, px) ([B, H, W]), zero outside the image.
 */
function bilinearGather(
  flat: tf.Tensor2D,
  py: tf.Tensor3D,
  px: tf.Tensor3D,
  b: number,
  h: number,
  w: number,
): tf.Tensor4D {
  return tf.tidy(() => {
    const y0 = detach(tf.floor(py)) as tf.Tensor3D;
    const x0 = detach(tf.floor(px)) as tf.Tensor3D;
    const wy = tf.sub(py, y0); // gradient 1 w.r.t. py
    const wx = tf.sub(px, x0);

    const batchBase = tf.mul(
      tf.reshape(tf.range(0, b, 1, 'float32'), [b, 1, 1]),
      h * w,
    );

    const corner = (
      yc: tf.Tensor3D,
      xc: tf.Tensor3D,
      weight: tf.Tensor3D,
    ): tf.Tensor4D => {
      const inside = tf.mul(
        tf.mul(
          tf.cast(tf.greaterEqual(yc, 0), 'float32'),
          tf.cast(tf.lessEqual(yc, h - 1), 'float32'),
        ),
        tf.mul(
          tf.cast(tf.greaterEqual(xc, 0), 'float32'),
          tf.cast(tf.lessEqual(xc, w - 1), 'float32'),
        ),
      );
      const yi = tf.clipByValue(yc, 0, h - 1);
      const xi = tf.clipByValue(xc, 0, w - 1);
      const index = tf.cast(
        tf.add(batchBase, tf.add(tf.mul(yi, w), xi)),
        'int32',
      ).flatten();
      const gathered = tf.reshape(tf.gather(flat, index), [b, h, w, -1]);
      return tf.mul(
        gathered,
        tf.expandDims(tf.mul(weight, inside), 3),
      ) as tf.Tensor4D;
    };

    const y1 = tf.add(y0, 1) as tf.Tensor3D;
    const x1 = tf.add(x0, 1) as tf.Tensor3D;
    const oneMinusWy = tf.sub(1, wy) as tf.Tensor3D;
    const oneMinusWx = tf.sub(1, wx) as tf.Tensor3D;
    return tf.addN([
      corner(y0 as tf.Tensor3D, x0 as tf.Tensor3D, tf.mul(oneMinusWy, oneMinusWx) as tf.Tensor3D),
      corner(y0 as tf.Tensor3D, x1, tf.mul(oneMinusWy, wx) as tf.Tensor3D),
      corner(y1, x0 as tf.Tensor3D, tf.mul(wy, oneMinusWx) as tf.Tensor3D),
      corner(y1, x1, tf.mul(wy, wx) as tf.Tensor3D),
    ]) as tf.Tensor4D;
  });
}

/**
 * Deformable 'same' 3x3 convolution.
 *
 * offsets: [B, H, W, 18], tap-major; channel 2t is dx (columns) and
 * channel 2t+1 is dy (rows) for tap t = 3*di + dj with displacements
 * di, dj in {-1, 0, 1} ordered row-major.
 */
export function ciDeformableConv(
  x: tf.Tensor4D,
  offsets: tf.Tensor4D,
  kernel: tf.Tensor4D,
  bias?: tf.Tensor1D,
): tf.Tensor4D {
  const [b, h, w, cin] = x.shape;
  if (
    offsets.shape[0] !== b ||
    offsets.shape[1] !== h ||
    offsets.shape[2] !== w ||
    offsets.shape[3] !== OFFSET_CHANNELS
  ) {
    throw new Error(
      `offsets [${offsets.shape}] do not fit input [${x.shape}]; ` +
        `need [${b}, ${h}, ${w}, ${OFFSET_CHANNELS}]`,
    );
  }
  if (kernel.shape[0] !== 3 || kernel.shape[1] !== 3 || kernel.shape[2] !== cin) {
    throw new Error(`kernel [${kernel.shape}] does not fit input [${x.shape}]`);
  }
  const cout = kernel.shape[3];
  return tf.tidy(() => {
    const { rows, cols } = indexGrids(h, w);
    const flat = tf.reshape(x, [b * h * w, cin]) as tf.Tensor2D;
    const sampled: tf.Tensor4D[] = [];
    for (let t = 0; t < TAPS; t++) {
      const di = Math.floor(t / 3) - 1;
      const dj = (t % 3) - 1;
      const dx = tf.reshape(
        tf.slice(offsets, [0, 0, 0, 2 * t], [b, h, w, 1]),
        [b, h, w],
      ) as tf.Tensor3D;
      const dy = tf.reshape(
        tf.slice(offsets, [0, 0, 0, 2 * t + 1], [b, h, w, 1]),
        [b, h, w],
      ) as tf.Tensor3D;
      const py = tf.add(tf.add(rows, di), dy) as tf.Tensor3D;
      const px = tf.add(tf.add(cols, dj), dx) as tf.Tensor3D;
      sampled.push(bilinearGather(flat, py, px, b, h, w));
    }
    const colsTensor = tf.reshape(tf.concat(sampled, 3), [b * h * w, TAPS * cin]);
    let out = tf.reshape(
      tf.matMul(colsTensor, tf.reshape(kernel, [TAPS * cin, cout])),
      [b, h, w, cout],
    ) as tf.Tensor4D;
    if (bias) {
      out = tf.add(out, bias);
    }
    return out;
  });
}
