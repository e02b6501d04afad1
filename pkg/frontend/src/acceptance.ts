/**
 * Desk-scale experiment runner with pass/fail gates:
 *
 *   1. balanced cubic, space-group labels: top-1..5 within 3 percentage
 *      points of the theoretical ceiling row;
 *   2. imbalanced cubic (per-group lattice ranges): final top-1 beats the
 *      balanced run by at least 10 points;
 *   3. balanced cubic, extinction-class labels: top-1 at least 95%.
 *
 * Datasets and the class report are produced through the generator CLI
 * (`xtinct`), which must be on PATH (or named via --xtinct).
 */

import { execFileSync } from "child_process";
import * as fs from "fs";
import * as path from "path";

import { readClassReport } from "./format";
import { TRAIN_DEFAULTS, TrainReport, trainEval } from "./train";

interface Args {
  work: string;
  xtinct: string;
  seed: number;
  epochs: number;
}

function parseArgs(argv: string[]): Args {
  const args: Args = {
    work: "acceptance-work",
    xtinct: "xtinct",
    seed: 20240811,
    epochs: TRAIN_DEFAULTS.epochs,
  };
  for (let i = 0; i < argv.length; i++) {
    const a = argv[i];
    if (a === "--work") args.work = argv[++i];
    else if (a === "--xtinct") args.xtinct = argv[++i];
    else if (a === "--seed") args.seed = Number(argv[++i]);
    else if (a === "--epochs") args.epochs = Number(argv[++i]);
    else throw new Error(`unknown argument ${a}`);
  }
  return args;
}

function sh(cmd: string, cmdArgs: string[]): void {
  process.stdout.write(`$ ${cmd} ${cmdArgs.join(" ")}\n`);
  execFileSync(cmd, cmdArgs, { stdio: ["ignore", "inherit", "inherit"] });
}

/** Per-group ranges mimicking a database-like imbalance: the smallest
 * member of each extinction class keeps the full range, the rest get a
 * narrow slice, so class frequencies become skewed. */
function writeImbalanceFile(
  classOf: Record<string, number>,
  dest: string
): void {
  const byClass = new Map<number, number[]>();
  for (const [sg, cls] of Object.entries(classOf)) {
    const list = byClass.get(cls) ?? [];
    list.push(Number(sg));
    byClass.set(cls, list);
  }
  const lines = ["# sg_number param min max step"];
  for (const members of byClass.values()) {
    members.sort((a, b) => a - b);
    for (let i = 0; i < members.length; i++) {
      const range = i === 0 ? "5 15 0.1" : "5 6.5 0.1";
      lines.push(`${members[i]} a ${range}`);
    }
  }
  fs.writeFileSync(dest, lines.join("\n") + "\n");
}

interface GateResult {
  name: string;
  pass: boolean;
  detail: string;
}

async function main(): Promise<void> {
  const args = parseArgs(process.argv.slice(2));
  const work = path.resolve(args.work);
  fs.mkdirSync(work, { recursive: true });
  const p = (...parts: string[]) => path.join(work, ...parts);

  const classReportPath = p("classes_cubic.json");
  sh(args.xtinct, ["classes", "--family", "cubic", "--out", classReportPath]);
  const classReport = readClassReport(classReportPath);
  const ceiling = classReport.theoretical_topk_pct;

  const genCommon = [
    "--family", "cubic", "--step", "0.1", "--patterns-per-lattice", "5",
    "--points", "512", "--fwhm", "0.4", "--split", "5:1",
    "--seed", String(args.seed), "--threads", "8",
  ];
  if (!fs.existsSync(p("balanced_train.ulbd"))) {
    sh(args.xtinct, ["gen", ...genCommon, "--a-range", "5:15", "--out", p("balanced")]);
  }
  const imbalanceFile = p("imbalance-cubic.txt");
  writeImbalanceFile(classReport.class_of, imbalanceFile);
  if (!fs.existsSync(p("imbalanced_train.ulbd"))) {
    sh(args.xtinct, [
      "gen", ...genCommon, "--imbalance-file", imbalanceFile, "--out", p("imbalanced"),
    ]);
  }

  const common = {
    epochs: args.epochs,
    batchSize: TRAIN_DEFAULTS.batchSize,
    learningRate: TRAIN_DEFAULTS.learningRate,
    lrDropEpochs: TRAIN_DEFAULTS.lrDropEpochs,
    lrDecay: TRAIN_DEFAULTS.lrDecay,
    seed: args.seed,
    patience: TRAIN_DEFAULTS.patience,
  };

  process.stdout.write("\n=== run 1: balanced cubic, space-group labels ===\n");
  const balanced = await trainEval({
    ...common,
    trainPath: p("balanced_train.ulbd"),
    testPath: p("balanced_test.ulbd"),
    labelMode: "space-group",
    reportPath: p("report_balanced.json"),
  });

  process.stdout.write("\n=== run 2: imbalanced cubic, space-group labels ===\n");
  const imbalanced = await trainEval({
    ...common,
    trainPath: p("imbalanced_train.ulbd"),
    testPath: p("imbalanced_test.ulbd"),
    labelMode: "space-group",
    reportPath: p("report_imbalanced.json"),
  });

  process.stdout.write("\n=== run 3: balanced cubic, extinction-class labels ===\n");
  const relabeled = await trainEval({
    ...common,
    trainPath: p("balanced_train.ulbd"),
    testPath: p("balanced_test.ulbd"),
    labelMode: "extinction-class",
    classReport: classReportPath,
    reportPath: p("report_classes.json"),
  });

  const gates: GateResult[] = [];
  const within = (report: TrainReport, k: number) =>
    Math.abs(100 * report.topk_accuracy[String(k)] - ceiling[String(k)]) <= 3.0;
  const row = (r: TrainReport) =>
    [1, 2, 3, 4, 5]
      .map((k) => (100 * r.topk_accuracy[String(k)]).toFixed(1))
      .join("/");
  gates.push({
    name: "balanced top-1..5 within 3pp of the theoretical ceiling",
    pass: [1, 2, 3, 4, 5].every((k) => within(balanced, k)),
    detail: `got ${row(balanced)} vs ceiling ${[1, 2, 3, 4, 5]
      .map((k) => ceiling[String(k)].toFixed(1))
      .join("/")}`,
  });
  const gap =
    100 * (imbalanced.topk_accuracy["1"] - balanced.topk_accuracy["1"]);
  gates.push({
    name: "imbalanced top-1 exceeds balanced by >= 10pp",
    pass: gap >= 10.0,
    detail: `imbalanced ${(100 * imbalanced.topk_accuracy["1"]).toFixed(1)}% vs ` +
      `balanced ${(100 * balanced.topk_accuracy["1"]).toFixed(1)}% (gap ${gap.toFixed(1)}pp)`,
  });
  gates.push({
    name: "class-relabeled top-1 >= 95%",
    pass: relabeled.topk_accuracy["1"] >= 0.95,
    detail: `got ${(100 * relabeled.topk_accuracy["1"]).toFixed(1)}%`,
  });

  process.stdout.write("\n=== gates ===\n");
  let failed = 0;
  for (const gate of gates) {
    const tag = gate.pass ? "PASS" : "FAIL";
    if (!gate.pass) failed += 1;
    process.stdout.write(`[${tag}] ${gate.name}: ${gate.detail}\n`);
  }
  fs.writeFileSync(
    p("acceptance_summary.json"),
    JSON.stringify(
      {
        gates: gates.map((g) => ({ ...g })),
        ceiling,
        reports: {
          balanced: "report_balanced.json",
          imbalanced: "report_imbalanced.json",
          classes: "report_classes.json",
        },
      },
      null,
      2
    )
  );
  if (failed > 0) {
    process.exit(1);
  }
}

main().catch((err) => {
  process.stderr.write(`error: ${err?.stack ?? err}\n`);
  process.exit(1);
});
