/** Session-layer behavior not covered by the acceptance flow tests. */
import { describe, expect, it } from 'vitest';

import { ItemView, StudyClient } from '../src/api';
import {
  Session, StorageLike, ViewHooks, clearCredentials, loadCredentials,
  saveCredentials,
} from '../src/session';
import { RATER_TOKEN, STUDY_ID, makeFakeStudy } from './fakeServer';

const noSleep = () => Promise.resolve();

function mapStorage(): StorageLike {
  const map = new Map<string, string>();
  return {
    getItem: (k) => map.get(k) ?? null,
    setItem: (k, v) => void map.set(k, v),
    removeItem: (k) => void map.delete(k),
  };
}

function makeView() {
  const state = {
    items: [] as ItemView[],
    errors: [] as string[],
    authFailures: 0,
    done: false,
  };
  const view: ViewHooks = {
    showItem: (item) => void state.items.push(item),
    showDone: () => void (state.done = true),
    showError: (message) => void state.errors.push(message),
    onAuthFailure: () => void (state.authFailures += 1),
  };
  return { state, view };
}

describe('credentials storage', () => {
  it('round-trips and clears', () => {
    const storage = mapStorage();
    expect(loadCredentials(storage)).toBeNull();
    saveCredentials(storage, { studyId: 's', raterToken: 't' });
    expect(loadCredentials(storage)).toEqual({ studyId: 's', raterToken: 't' });
    clearCredentials(storage);
    expect(loadCredentials(storage)).toBeNull();
  });

  it('treats a partial pair as absent', () => {
    const storage = mapStorage();
    storage.setItem('ecgstudy.study_id', 's');
    expect(loadCredentials(storage)).toBeNull();
  });
});

describe('Session error routing', () => {
  it('auth failure goes to the token screen hook, not the error panel', async () => {
    const study = makeFakeStudy(2);
    const { state, view } = makeView();
    const client = new StudyClient('', STUDY_ID, 'bad-token', study.fetchFn, noSleep);
    await new Session(client, view).start();
    expect(state.authFailures).toBe(1);
    expect(state.errors).toHaveLength(0);
  });

  it('exhausted retries surface in the error panel and retry() recovers', async () => {
    const study = makeFakeStudy(2);
    const { state, view } = makeView();
    const client = new StudyClient('', STUDY_ID, RATER_TOKEN, study.fetchFn, noSleep);
    const session = new Session(client, view);
    study.injectNetworkFailures(100);
    await session.start();
    expect(state.errors).toHaveLength(1);
    expect(state.items).toHaveLength(0);

    study.injectNetworkFailures(0);
    await session.retry();
    expect(state.items).toHaveLength(1);
  });

  it('malformed item payload shows an error with retry still possible', async () => {
    const study = makeFakeStudy(1);
    study.items[0].samples_uv = [];
    const { state, view } = makeView();
    const client = new StudyClient('', STUDY_ID, RATER_TOKEN, study.fetchFn, noSleep);
    const session = new Session(client, view);
    await session.start();
    expect(state.errors).toEqual(['malformed item payload from server']);

    study.items[0].samples_uv = [1, 2, 3];
    await session.retry();
    expect(state.items).toHaveLength(1);
  });

  it('a failed submit keeps the item current so the choice can be retried', async () => {
    const study = makeFakeStudy(2);
    const { state, view } = makeView();
    const client = new StudyClient('', STUDY_ID, RATER_TOKEN, study.fetchFn, noSleep);
    const session = new Session(client, view);
    await session.start();

    study.injectNetworkFailures(100);
    await session.choose('AFIB');
    expect(state.errors).toHaveLength(1);
    expect(study.annotations.size).toBe(0);

    study.injectNetworkFailures(0);
    await session.choose('AFIB');
    expect(study.annotations.get(state.items[0].item_id)).toBe('AFIB');
  });

  it('choose before any item is displayed is a no-op', async () => {
    const study = makeFakeStudy(1);
    const { view } = makeView();
    const client = new StudyClient('', STUDY_ID, RATER_TOKEN, study.fetchFn, noSleep);
    await new Session(client, view).choose('NSR');
    expect(study.annotations.size).toBe(0);
  });
});
