/** `hdivles-plot <kind> <inputs...> -o out.svg [options]`
 *
 * kinds: energy | errors | dissipation | energy-overlay | spectrum | wall |
 * vorticity.  The energy-overlay kind prints the maximum relative gap
 * between the data and the closed-form decay curve.
 */

import { writeFileSync } from "node:fs";
import process from "node:process";

import { readChannelStats, readSpectrum, readTimeSeries } from "./csv.js";
import {
  renderDissipation,
  renderEnergy,
  renderEnergyOverlay,
  renderErrors,
  renderSpectrum,
  renderVorticity,
  renderWall,
} from "./figures.js";
import { readSnapshot } from "./snapshot.js";

interface Args {
  kind: string;
  inputs: string[];
  output: string;
  nu?: number;
  rate?: number;
  columns?: string[];
  logY: boolean;
  guide: boolean;
}

export function parseArgs(argv: string[]): Args {
  const args: Args = { kind: "", inputs: [], output: "figure.svg", logY: false, guide: false };
  const rest = [...argv];
  args.kind = rest.shift() ?? "";
  while (rest.length) {
    const tok = rest.shift()!;
    if (tok === "-o" || tok === "--output") args.output = expectValue(tok, rest);
    else if (tok === "--nu") args.nu = Number(expectValue(tok, rest));
    else if (tok === "--rate") args.rate = Number(expectValue(tok, rest));
    else if (tok === "--columns") args.columns = expectValue(tok, rest).split(",");
    else if (tok === "--log-y") args.logY = true;
    else if (tok === "--guide") args.guide = true;
    else if (tok.startsWith("-")) throw new Error(`unknown option ${tok}`);
    else args.inputs.push(tok);
  }
  if (!args.kind) throw new Error("usage: plot <kind> <inputs...> -o out.svg");
  if (!args.inputs.length) throw new Error("no input files given");
  return args;
}

function expectValue(flag: string, rest: string[]): string {
  const v = rest.shift();
  if (v === undefined) throw new Error(`option ${flag} needs a value`);
  return v;
}

export function run(argv: string[]): number {
  let args: Args;
  try {
    args = parseArgs(argv);
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    return 2;
  }
  try {
    const svg = render(args);
    writeFileSync(args.output, svg);
    console.log(`wrote ${args.output}`);
    return 0;
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    return 1;
  }
}

function render(args: Args): string {
  switch (args.kind) {
    case "energy":
      return renderEnergy(readTimeSeries(args.inputs[0]), args.columns ?? ["ke"], args.logY);
    case "errors":
      return renderErrors(readTimeSeries(args.inputs[0]));
    case "dissipation":
      return renderDissipation(readTimeSeries(args.inputs[0]));
    case "energy-overlay": {
      if (args.nu === undefined && args.rate === undefined) {
        throw new Error("energy-overlay needs --nu (or --rate)");
      }
      const result = renderEnergyOverlay(readTimeSeries(args.inputs[0]), args.nu ?? 0, args.rate);
      console.log(`max relative gap vs exact decay: ${result.maxRelativeGap.toExponential(3)}`);
      return result.svg;
    }
    case "spectrum":
      return renderSpectrum(readSpectrum(args.inputs[0]), args.guide);
    case "wall":
      return renderWall(readChannelStats(args.inputs[0]));
    case "vorticity":
      return renderVorticity(readSnapshot(args.inputs[0]));
    default:
      throw new Error(`unknown figure kind ${args.kind}`);
  }
}

const invoked = process.argv[1] ?? "";
if (invoked.endsWith("cli.js") || invoked.endsWith("cli.ts")) {
  process.exit(run(process.argv.slice(2)));
}
