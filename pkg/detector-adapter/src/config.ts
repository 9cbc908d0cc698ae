/** Adapter configuration from command-line flags.
 *
 * Launched as `node dist/main.js --weights <path>`; everything else has
 * defaults. All settings are echoed in the handshake metadata so the
 * harness records them in its run manifest.
 */

import { readFileSync } from "node:fs";

import { DecodeStyle } from "./decode.js";

export interface AdapterConfig {
  weightsPath: string;
  backend: "tfjs" | "fixture";
  inputSize: number;
  decode: DecodeStyle;
  confThreshold: number;
  nmsIouThreshold: number;
  candidateThreshold: number;
  classNames: string[];
  classMap: Record<string, string>;
}

// COCO-80, the label set of the usual pretrained YOLO-family checkpoints.
export const COCO_CLASSES = [
  "person", "bicycle", "car", "motorcycle", "airplane", "bus", "train",
  "truck", "boat", "traffic light", "fire hydrant", "stop sign",
  "parking meter", "bench", "bird", "cat", "dog", "horse", "sheep", "cow",
  "elephant", "bear", "zebra", "giraffe", "backpack", "umbrella", "handbag",
  "tie", "suitcase", "frisbee", "skis", "snowboard", "sports ball", "kite",
  "baseball bat", "baseball glove", "skateboard", "surfboard",
  "tennis racket", "bottle", "wine glass", "cup", "fork", "knife", "spoon",
  "bowl", "banana", "apple", "sandwich", "orange", "broccoli", "carrot",
  "hot dog", "pizza", "donut", "cake", "chair", "couch", "potted plant",
  "bed", "dining table", "toilet", "tv", "laptop", "mouse", "remote",
  "keyboard", "cell phone", "microwave", "oven", "toaster", "sink",
  "refrigerator", "book", "clock", "vase", "scissors", "teddy bear",
  "hair drier", "toothbrush",
];

export const DEFAULT_CLASS_MAP: Record<string, string> = { person: "Pedestrian" };

export function parseArgs(argv: string[]): AdapterConfig {
  const config: AdapterConfig = {
    weightsPath: "",
    backend: "tfjs",
    inputSize: 640,
    decode: "v5",
    confThreshold: 0.5,
    nmsIouThreshold: 0.45,
    candidateThreshold: 0.1,
    classNames: COCO_CLASSES,
    classMap: { ...DEFAULT_CLASS_MAP },
  };
  for (let i = 0; i < argv.length; i++) {
    const flag = argv[i];
    const next = () => {
      const value = argv[++i];
      if (value === undefined) throw new Error(`missing value for ${flag}`);
      return value;
    };
    switch (flag) {
      case "--weights":
        config.weightsPath = next();
        break;
      case "--backend": {
        const value = next();
        if (value !== "tfjs" && value !== "fixture") {
          throw new Error(`unknown backend '${value}'`);
        }
        config.backend = value;
        break;
      }
      case "--input-size":
        config.inputSize = parsePositiveInt(flag, next());
        break;
      case "--decode": {
        const value = next();
        if (value !== "v5" && value !== "v8") {
          throw new Error(`unknown decode style '${value}'`);
        }
        config.decode = value;
        break;
      }
      case "--conf":
        config.confThreshold = parseUnitFloat(flag, next());
        break;
      case "--nms-iou":
        config.nmsIouThreshold = parseUnitFloat(flag, next());
        break;
      case "--candidate-conf":
        config.candidateThreshold = parseUnitFloat(flag, next());
        break;
      case "--class-names":
        config.classNames = readFileSync(next(), "utf-8")
          .split("\n")
          .map((s) => s.trim())
          .filter(Boolean);
        break;
      case "--class-map": {
        // repeated from=to pairs, e.g. --class-map person=Pedestrian
        const [from, to] = next().split("=");
        if (!from || !to) throw new Error(`--class-map expects from=to`);
        config.classMap[from] = to;
        break;
      }
      default:
        throw new Error(`unknown flag '${flag}'`);
    }
  }
  if (!config.weightsPath) {
    throw new Error("--weights <path> is required");
  }
  if (!Object.values(config.classMap).includes("Pedestrian")) {
    throw new Error("class map must cover the Pedestrian target");
  }
  return config;
}

function parsePositiveInt(flag: string, value: string): number {
  const parsed = Number.parseInt(value, 10);
  if (!Number.isFinite(parsed) || parsed <= 0) {
    throw new Error(`${flag} needs a positive integer, got '${value}'`);
  }
  return parsed;
}

function parseUnitFloat(flag: string, value: string): number {
  const parsed = Number.parseFloat(value);
  if (!Number.isFinite(parsed) || parsed < 0 || parsed > 1) {
    throw new Error(`${flag} needs a number in [0, 1], got '${value}'`);
  }
  return parsed;
}
