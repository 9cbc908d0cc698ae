/** Pretrained-model backend running a tfjs graph model on the CPU.
 *
 * The weights path points at a tfjs graph-model export (model.json plus
 * weight shards); the prediction tensor layout is selected by the decode
 * style. Preprocessing is a bilinear letterbox onto a gray (114) square,
 * pixels scaled to [0, 1]; it is reported through the handshake so a run
 * manifest records exactly what the detector saw.
 */

import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";

import { DecodeStyle, decodePredictions } from "./decode.js";
import { Candidate } from "./detections.js";
import { letterboxMapping, unmapBox } from "./geometry.js";
import { DetectorBackend, ImageRef } from "./backend.js";

export interface TfjsBackendOptions {
  weightsPath: string;
  inputSize: number;
  decode: DecodeStyle;
  /** pre-NMS candidate gate inside the decoder */
  candidateThreshold: number;
  classNames: string[];
}

const PAD_GRAY = 114 / 255;

type Tf = typeof import("@tensorflow/tfjs");

export class TfjsBackend implements DetectorBackend {
  readonly info: Record<string, unknown>;

  private constructor(
    private readonly tf: Tf,
    private readonly model: import("@tensorflow/tfjs").GraphModel,
    private readonly png: typeof import("pngjs"),
    private readonly opts: TfjsBackendOptions,
  ) {
    this.info = {
      kind: "tfjs-graph-model",
      weights: opts.weightsPath,
      tfjs_backend: this.tf.getBackend(),
      input_size: opts.inputSize,
      decode: opts.decode,
      preprocessing: "letterbox bilinear, pad 114, pixels scaled to [0,1]",
      deterministic: true,
    };
  }

  static async load(opts: TfjsBackendOptions): Promise<TfjsBackend> {
    const tf = await import("@tensorflow/tfjs");
    const png = await import("pngjs");
    await tf.setBackend("cpu");
    await tf.ready();
    const model = await tf.loadGraphModel(fileSystemHandler(tf, opts.weightsPath));
    return new TfjsBackend(tf, model, png, opts);
  }

  async detect(image: ImageRef): Promise<Candidate[]> {
    const { tf } = this;
    const raw = this.png.PNG.sync.read(readFileSync(image.path));
    const mapping = letterboxMapping(raw.width, raw.height, this.opts.inputSize);

    const output = tf.tidy(() => {
      const rgba = tf.tensor3d(new Uint8Array(raw.data), [raw.height, raw.width, 4]);
      const rgb = rgba.slice([0, 0, 0], [raw.height, raw.width, 3]).toFloat().div(255);
      const scaledH = Math.round(raw.height * mapping.scale);
      const scaledW = Math.round(raw.width * mapping.scale);
      const resized = tf.image.resizeBilinear(rgb as import("@tensorflow/tfjs").Tensor3D, [
        scaledH,
        scaledW,
      ]);
      const padTop = Math.floor(mapping.padY);
      const padLeft = Math.floor(mapping.padX);
      const padded = resized.pad(
        [
          [padTop, this.opts.inputSize - scaledH - padTop],
          [padLeft, this.opts.inputSize - scaledW - padLeft],
          [0, 0],
        ],
        PAD_GRAY,
      );
      return this.model.predict(padded.expandDims(0)) as import("@tensorflow/tfjs").Tensor;
    });
    const shape = output.shape as number[];
    const data = (await output.data()) as Float32Array;
    output.dispose();

    const decoded = decodePredictions(data, shape, {
      style: this.opts.decode,
      confThreshold: this.opts.candidateThreshold,
    });
    return decoded.map((det) => ({
      box: unmapBox(det.box, mapping),
      confidence: Math.min(Math.max(det.confidence, 0), 1),
      className: this.opts.classNames[det.classId] ?? `class_${det.classId}`,
    }));
  }
}

/** Load model.json and its weight shards straight from disk. */
function fileSystemHandler(tf: Tf, modelJsonPath: string): import("@tensorflow/tfjs").io.IOHandler {
  return {
    async load() {
      const modelDir = dirname(modelJsonPath);
      const modelJson = JSON.parse(readFileSync(modelJsonPath, "utf-8"));
      const manifest = modelJson.weightsManifest ?? [];
      const specs: import("@tensorflow/tfjs").io.WeightsManifestEntry[] = [];
      const buffers: Buffer[] = [];
      for (const group of manifest) {
        specs.push(...group.weights);
        for (const relPath of group.paths) {
          buffers.push(readFileSync(join(modelDir, relPath)));
        }
      }
      const weightData = Buffer.concat(buffers);
      return {
        modelTopology: modelJson.modelTopology,
        format: modelJson.format,
        generatedBy: modelJson.generatedBy,
        convertedBy: modelJson.convertedBy,
        weightSpecs: specs,
        weightData: weightData.buffer.slice(
          weightData.byteOffset,
          weightData.byteOffset + weightData.byteLength,
        ),
      };
    },
  };
}
