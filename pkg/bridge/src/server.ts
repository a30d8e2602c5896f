/**
 * Transports: stdio and TCP. Stateless between requests; every
 * connection gets the handshake line first, then one response line per
 * request line, in arrival order.
 */

import { createInterface } from 'node:readline';
import { createServer, type Server, type Socket } from 'node:net';
import type { Backend } from './backends.js';
import {
  handshakeLine,
  parseRequest,
  serializeResponse,
  ScoringFault,
  type ScoreResponseMsg,
} from './protocol.js';

export function handleLine(backend: Backend, line: string): string {
  let id = -1;
  let response: ScoreResponseMsg;
  try {
    const request = parseRequest(line);
    id = request.id;
    const error = backend.score(request);
    if (!Number.isFinite(error) || error < 0) {
      throw new ScoringFault(`backend produced invalid error ${error}`);
    }
    response = { id, error };
  } catch (err) {
    const message = err instanceof Error ? err.message : String(err);
    response = { id, fault: message };
  }
  return serializeResponse(response);
}

export async function serveStdio(backend: Backend): Promise<void> {
  process.stdout.write(handshakeLine() + '\n');
  const rl = createInterface({ input: process.stdin });
  for await (const line of rl) {
    if (!line.trim()) continue;
    process.stdout.write(handleLine(backend, line) + '\n');
  }
}

export function serveTcp(backend: Backend, port: number): Server {
  const server = createServer((socket: Socket) => {
    socket.write(handshakeLine() + '\n');
    const rl = createInterface({ input: socket });
    rl.on('line', (line: string) => {
      if (!line.trim()) return;
      socket.write(handleLine(backend, line) + '\n');
    });
    socket.on('error', () => socket.destroy());
  });
  server.listen(port);
  return server;
}
