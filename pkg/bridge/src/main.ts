#!/usr/bin/env node
/**
 * CLI: `--stdio | --tcp PORT`, `--backend replay:PATH|const:VALUE|hash`,
 * optional `--template` for mapping rendered prompts back to replay
 * matrix labels. In TCP mode the first stdout line reports the bound
 * port as JSON so callers can use `--tcp 0`.
 */

import type { AddressInfo } from 'node:net';
import { backendFromSpec } from './backends.js';
import { serveStdio, serveTcp } from './server.js';

interface CliArgs {
  stdio: boolean;
  tcpPort: number | null;
  backend: string;
  template?: string;
}

function parseArgs(argv: string[]): CliArgs {
  const args: CliArgs = { stdio: false, tcpPort: null, backend: '' };
  for (let i = 0; i < argv.length; i += 1) {
    const arg = argv[i];
    if (arg === '--stdio') {
      args.stdio = true;
    } else if (arg === '--tcp') {
      const value = argv[++i];
      if (value === undefined) throw new Error('--tcp needs a port');
      args.tcpPort = Number(value);
      if (!Number.isInteger(args.tcpPort) || args.tcpPort < 0) {
        throw new Error(`invalid port ${value}`);
      }
    } else if (arg === '--backend') {
      const value = argv[++i];
      if (value === undefined) throw new Error('--backend needs a value');
      args.backend = value;
    } else if (arg === '--template') {
      const value = argv[++i];
      if (value === undefined) throw new Error('--template needs a value');
      args.template = value;
    } else {
      throw new Error(`unknown argument ${arg}`);
    }
  }
  if (args.stdio === (args.tcpPort !== null)) {
    throw new Error('pick exactly one transport: --stdio or --tcp PORT');
  }
  if (!args.backend) {
    throw new Error('--backend is required (replay:PATH | const:VALUE | hash)');
  }
  return args;
}

async function main(): Promise<void> {
  let args: CliArgs;
  try {
    args = parseArgs(process.argv.slice(2));
  } catch (err) {
    process.stderr.write(`usage error: ${err instanceof Error ? err.message : err}\n`);
    process.exit(1);
  }
  const backend = backendFromSpec(args.backend, args.template);
  if (args.stdio) {
    await serveStdio(backend);
    return;
  }
  const server = serveTcp(backend, args.tcpPort as number);
  server.on('listening', () => {
    const { port } = server.address() as AddressInfo;
    process.stdout.write(JSON.stringify({ listening: port }) + '\n');
  });
}

main().catch((err) => {
  process.stderr.write(`fatal: ${err instanceof Error ? err.stack : err}\n`);
  process.exit(2);
});
